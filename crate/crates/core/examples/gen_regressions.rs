//! Regenerates the stored division regression file on stdout:
//!
//! ```text
//! cargo run --example gen_regressions > data/fdiv_regressions.txt
//! ```
//!
//! Expectations come from the integer reference oracle, never typed by hand.

use srt4div::harness::{fdiv_regression_family, format_regression_file};

fn main() {
    println!("# Stored division cases: `label a_hex b_hex expected_hex flags` per line.");
    println!("# Expectations computed by the integer long-division reference.");
    println!("# Regenerate with: cargo run --example gen_regressions > data/fdiv_regressions.txt");
    print!("{}", format_regression_file(&fdiv_regression_family()));
}
