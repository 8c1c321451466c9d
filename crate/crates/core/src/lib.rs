//! Bit-accurate model of a radix-4 digit-recurrence divider with predicted
//! quotient digits, plus the machinery needed to certify it.
//!
//! The divider guesses each quotient digit from a short window of the shifted
//! partial remainder, then repairs the guess with one comparison against the
//! divisor — exactly, against precomputed constants, or through a fuzzy
//! inference step that resolves the overlap region between adjacent digits.
//! Quotient digits stream through an on-the-fly converter so no carry
//! propagation is needed at the end, and a thin packaging layer turns the
//! fixed-point engine into a correctly rounded IEEE-754 binary64 divide with
//! full exception-flag semantics.
//!
//! Module map:
//!
//! * [`fixedpoint`] — exact two's-complement fixed-point scalars; every
//!   remainder comparison in the model is integer-exact.
//! * [`qds`] — digit prediction, the three correction policies, and grid
//!   sweeps that certify remainder containment.
//! * [`fuzzy`] — Mamdani inference (triangular memberships, max-min
//!   aggregation, centroid defuzzification) over the correction overlap band.
//! * [`otf`] — on-the-fly conversion of signed digits into binary quotient
//!   registers.
//! * [`srt`] — the cycle-accurate recurrence engine with per-cycle traces and
//!   a latency estimator.
//! * [`ieee754`] — binary64 packaging: normalization, round-to-nearest-even,
//!   gradual underflow, and the five exception flags.
//! * [`oracle`] — two independent referees: the host FPU and an integer
//!   long-division model.
//! * [`harness`] — deterministic fuzz campaigns, regression vectors, and
//!   cross-policy comparison.

pub mod fixedpoint;
pub mod fuzzy;
pub mod harness;
pub mod ieee754;
pub mod oracle;
pub mod otf;
pub mod qds;
pub mod srt;

pub use fixedpoint::FixedPoint;
pub use harness::{fuzz_divide, run_regressions, CampaignReport, RegressionVector};
pub use ieee754::{fdiv, fdiv_policy, fdiv_with, Flags};
pub use qds::{DigitSelector, Policy};
pub use srt::{run_divide, LatencyModel, QuotientResult, SrtConfig};
