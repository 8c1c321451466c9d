//! Command-line front end for the division model: one-off divides with
//! optional cycle traces, verification campaigns, containment sweeps,
//! selection-map exports, fuzzy inference inspection, and latency estimates.
//!
//! Exit codes: 0 on success, 1 when a verification command found mismatches
//! or violations, 2 on usage or input errors.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use srt4div::fuzzy::{defuzzify_centroid, fuzzify, mamdani_aggregate, FuzzyRuleSet};
use srt4div::harness::{fuzz_divide, run_regressions};
use srt4div::ieee754::{fdiv_traced, fdiv_with};
use srt4div::qds::{build_pd_map, sweep_containment, DigitSelector, Policy};
use srt4div::srt::{estimate_latency, trace_to_json, LatencyModel, SrtConfig};

#[derive(Parser)]
#[command(
    name = "srt4div",
    version,
    about = "Radix-4 digit-recurrence divider model and verification lab"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Divide two binary64 values given as 16-digit hex words.
    Div {
        /// Dividend bits, e.g. 3FF0000000000000
        a: String,
        /// Divisor bits
        b: String,
        /// Digit-correction policy: exact, constants, or fuzzy
        #[arg(long, default_value = "exact")]
        policy: Policy,
        /// Write the per-cycle recurrence trace to this file as JSON
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Fuzz the divider against both oracles; prints the campaign report.
    Fuzz {
        /// Number of operand pairs
        #[arg(long)]
        n: u64,
        /// Campaign seed (same seed, same cases, same report)
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "exact")]
        policy: Policy,
    },
    /// Exhaustive containment sweep over the divisor/remainder grid.
    Sweep {
        /// Grid resolution in fractional bits (both axes, minimum 8)
        #[arg(long = "frac-bits", default_value_t = 9)]
        frac_bits: u32,
        #[arg(long, default_value = "exact")]
        policy: Policy,
    },
    /// Export the digit-selection map over the (divisor, remainder) plane.
    Pdmap {
        /// Divisor grid resolution in fractional bits
        #[arg(long = "res-d")]
        res_d: u32,
        /// Remainder grid resolution in fractional bits
        #[arg(long = "res-p")]
        res_p: u32,
        #[arg(long, default_value = "exact")]
        policy: Policy,
        /// Output CSV path
        #[arg(long)]
        out: PathBuf,
    },
    /// Inspect one fuzzy inference: memberships, aggregate, centroid.
    FuzzyDemo {
        /// Normalized residual position in [0, 1]
        #[arg(long)]
        u: f64,
        /// Optional rule-set config file overriding the defaults
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Latency estimate for a stage-delay model.
    Latency {
        /// Iteration count
        #[arg(long)]
        iters: u32,
        /// Per-stage delays in ns, comma separated
        #[arg(long = "stage-ns", value_delimiter = ',', required = true)]
        stage_ns: Vec<u64>,
        /// Fixed pre/post overhead in ns
        #[arg(long = "overhead-ns", default_value_t = 0)]
        overhead_ns: u64,
    },
    /// Run a stored regression file under every policy.
    Regress {
        /// Vector file: `label a_hex b_hex expected_hex flags` per line
        #[arg(long)]
        file: PathBuf,
    },
}

fn parse_hex_word(s: &str) -> Result<u64, String> {
    let body = s.trim_start_matches("0x").trim_start_matches("0X");
    u64::from_str_radix(body, 16).map_err(|e| format!("bad hex word '{s}': {e}"))
}

fn run(cmd: Cmd) -> Result<ExitCode, String> {
    match cmd {
        Cmd::Div {
            a,
            b,
            policy,
            trace,
        } => {
            let a = parse_hex_word(&a)?;
            let b = parse_hex_word(&b)?;
            let selector = DigitSelector::new(policy);
            let (bits, flags) = if let Some(path) = trace {
                let (bits, flags, cycles) = fdiv_traced(a, b, &selector);
                fs::write(&path, trace_to_json(&cycles))
                    .map_err(|e| format!("cannot write {}: {e}", path.display()))?;
                (bits, flags)
            } else {
                fdiv_with(a, b, &selector)
            };
            println!("{bits:016X} flags:{flags}");
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Fuzz { n, seed, policy } => {
            let report = fuzz_divide(n, seed, policy).map_err(|e| e.to_string())?;
            println!("{}", report.to_json());
            Ok(exit_by(report.passed()))
        }
        Cmd::Sweep { frac_bits, policy } => {
            let selector = DigitSelector::new(policy);
            let report = sweep_containment(frac_bits, &selector).map_err(|e| e.to_string())?;
            println!("{} violations", report.violations.len());
            Ok(exit_by(report.violations.is_empty()))
        }
        Cmd::Pdmap {
            res_d,
            res_p,
            policy,
            out,
        } => {
            let selector = DigitSelector::new(policy);
            let map = build_pd_map(res_d, res_p, &selector).map_err(|e| e.to_string())?;
            let mut content = format!(
                "# srt4div {} pdmap res_d={res_d} res_p={res_p} policy={policy}\n",
                env!("CARGO_PKG_VERSION")
            );
            content.push_str(&map.to_csv());
            fs::write(&out, content).map_err(|e| format!("cannot write {}: {e}", out.display()))?;
            println!("wrote {} cells to {}", map.cells.len(), out.display());
            Ok(ExitCode::SUCCESS)
        }
        Cmd::FuzzyDemo { u, config } => {
            let rules = match config {
                Some(path) => {
                    let text = fs::read_to_string(&path)
                        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
                    FuzzyRuleSet::from_config_str(&text).map_err(|e| e.to_string())?
                }
                None => FuzzyRuleSet::default(),
            };
            let (keep, inc) = fuzzify(u, &rules);
            println!("u: {u}");
            println!("memberships: keep={keep} increment={inc}");
            let agg = mamdani_aggregate(keep, inc, &rules);
            println!("aggregate (y, mu):");
            for i in 0..=8u32 {
                let y = f64::from(i) / 8.0;
                println!("  {y:.3} {:.6}", agg.eval(y));
            }
            let centroid = defuzzify_centroid(&agg, rules.grid_n).map_err(|e| e.to_string())?;
            println!("centroid: {centroid}");
            println!(
                "decision: {}",
                if centroid > 0.5 { "increment" } else { "keep" }
            );
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Latency {
            iters,
            stage_ns,
            overhead_ns,
        } => {
            let cfg = SrtConfig::new(iters, Policy::Exact).map_err(|e| e.to_string())?;
            let model = LatencyModel {
                stage_ns,
                overhead_ns,
            };
            let ns = estimate_latency(&cfg, &model).map_err(|e| e.to_string())?;
            println!("{ns} ns");
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Regress { file } => {
            let report = run_regressions(&file).map_err(|e| e.to_string())?;
            println!(
                "{} cases, {} mismatches",
                report.cases_run,
                report.mismatches.len()
            );
            for m in report.mismatches.iter().take(20) {
                println!(
                    "  {}: {}/{} got {} flags:{} expected {} flags:{}",
                    m.case, m.a, m.b, m.got, m.got_flags, m.expected, m.expected_flags
                );
            }
            Ok(exit_by(report.passed()))
        }
    }
}

fn exit_by(passed: bool) -> ExitCode {
    if passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
