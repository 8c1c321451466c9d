//! The radix-4 division recurrence engine.
//!
//! Iterates `p_{j+1} = 4*p_j - q_{j+1}*d` with policy-driven digit selection,
//! accumulating the quotient on the fly and recording a per-cycle trace.
//! Mirroring the hardware datapath, every cycle materializes *both* candidate
//! next remainders (keep and increment) before the correction decision lands,
//! then discards one.
//!
//! The engine starts from `p_0 = x/4`, which puts the loop invariant
//! `|p| <= (2/3)*d` in force from cycle 1 for any normalized operand pair;
//! the factor of 4 is restored when the quotient is assembled. Every step
//! re-checks the invariant and aborts with the full trace on violation —
//! a selection-logic bug must never be silently carried forward.

use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::fixedpoint::{FixedPoint, FixedPointError};
use crate::fuzzy::FuzzyRuleSet;
use crate::otf::{OtfError, OtfState};
use crate::qds::{DigitSelector, Policy, QDigit, QdsError};

/// Quotient values resolved per iteration.
pub const RADIX: u32 = 4;
/// Largest digit magnitude in the signed digit set.
pub const ALPHA: i8 = 2;
/// Redundancy factor alpha/(radix-1) as an exact rational.
pub const RHO: (i128, i128) = (2, 3);

#[derive(Debug, Error)]
pub enum SrtError {
    #[error("operand {which} = {value} outside [1/2, 1)")]
    UnnormalizedOperand { which: &'static str, value: String },
    #[error("iteration count {0} outside 1..=60")]
    BadIterationCount(u32),
    #[error("containment lost at cycle {j}: |{p_next}| > (2/3)*{d}")]
    ContainmentLost {
        j: u32,
        p_next: String,
        d: String,
        /// Everything computed up to and including the offending cycle.
        cycles: Vec<CycleTrace>,
    },
    #[error("latency model needs at least one positive stage delay")]
    BadLatencyModel,
    #[error(transparent)]
    Qds(#[from] QdsError),
    #[error(transparent)]
    Otf(#[from] OtfError),
    #[error(transparent)]
    Fixed(#[from] FixedPointError),
}

/// Engine parameters. Radix, digit set, and redundancy factor are fixed by
/// the design; only the iteration count, the correction policy, and trace
/// recording vary.
#[derive(Debug, Clone)]
pub struct SrtConfig {
    n_iters: u32,
    policy: Policy,
    record_trace: bool,
}

impl SrtConfig {
    /// `n_iters` digits of 2 bits each; capped at 60 so the quotient and its
    /// fixed-point view always fit the 128-bit registers.
    pub fn new(n_iters: u32, policy: Policy) -> Result<Self, SrtError> {
        if !(1..=60).contains(&n_iters) {
            return Err(SrtError::BadIterationCount(n_iters));
        }
        Ok(SrtConfig {
            n_iters,
            policy,
            record_trace: true,
        })
    }

    /// Disables per-cycle trace records (bulk verification runs).
    pub fn without_trace(mut self) -> Self {
        self.record_trace = false;
        self
    }

    pub fn n_iters(&self) -> u32 {
        self.n_iters
    }

    pub fn policy(&self) -> Policy {
        self.policy
    }

    pub fn records_trace(&self) -> bool {
        self.record_trace
    }
}

/// Both candidate next remainders, computed before the correction decision.
#[derive(Debug, Clone, Copy)]
pub struct StepCandidates {
    /// `rp - q_est*d`: next remainder if the estimate is kept.
    pub p_keep: FixedPoint,
    /// `rp - (q_est+1)*d`: next remainder if the estimate is bumped.
    pub p_inc: FixedPoint,
}

fn ser_fixed<S: Serializer>(v: &FixedPoint, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(v)
}

/// One cycle of the recurrence, with every intermediate the datapath
/// would expose. Fixed-point values serialize as exact decimal strings.
#[derive(Debug, Clone, Serialize)]
pub struct CycleTrace {
    pub j: u32,
    #[serde(serialize_with = "ser_fixed")]
    pub p_in: FixedPoint,
    #[serde(serialize_with = "ser_fixed")]
    pub rp: FixedPoint,
    pub q_est: i8,
    pub q_final: i8,
    #[serde(serialize_with = "ser_fixed")]
    pub p_keep: FixedPoint,
    #[serde(serialize_with = "ser_fixed")]
    pub p_inc: FixedPoint,
    #[serde(serialize_with = "ser_fixed")]
    pub p_out: FixedPoint,
    #[serde(rename = "A_bits")]
    pub a_bits: String,
    #[serde(rename = "B_bits")]
    pub b_bits: String,
}

/// Running state of one division.
#[derive(Debug, Clone)]
pub struct DivState {
    j: u32,
    p: FixedPoint,
    d: FixedPoint,
    otf: OtfState,
    digits: Vec<QDigit>,
    cycles: Vec<CycleTrace>,
    record_trace: bool,
}

fn check_normalized(v: &FixedPoint, which: &'static str) -> Result<(), SrtError> {
    let one = FixedPoint::from_int(1).expect("1");
    let out_of_range = v.scaled_cmp(2, &one, 1) == std::cmp::Ordering::Less
        || v.cmp_value(&one) != std::cmp::Ordering::Less;
    if out_of_range {
        return Err(SrtError::UnnormalizedOperand {
            which,
            value: v.to_string(),
        });
    }
    Ok(())
}

impl DivState {
    /// Starts a division of `x` by `d`, both normalized to [1/2, 1).
    /// `p_0 = x/4` (exact: two more fractional bits), establishing
    /// `|p_0| < 1/4 <= (2/3)*d` before the first cycle.
    pub fn init(x: &FixedPoint, d: &FixedPoint, cfg: &SrtConfig) -> Result<Self, SrtError> {
        check_normalized(x, "dividend")?;
        check_normalized(d, "divisor")?;
        let p0 = FixedPoint::new(x.raw(), x.frac_bits() + 2)?;
        Ok(DivState {
            j: 0,
            p: p0,
            d: *d,
            otf: OtfState::new(),
            digits: Vec::new(),
            cycles: Vec::new(),
            record_trace: cfg.records_trace(),
        })
    }

    pub fn j(&self) -> u32 {
        self.j
    }

    pub fn p(&self) -> &FixedPoint {
        &self.p
    }

    pub fn d(&self) -> &FixedPoint {
        &self.d
    }

    pub fn otf(&self) -> &OtfState {
        &self.otf
    }

    pub fn digits(&self) -> &[QDigit] {
        &self.digits
    }

    pub fn cycles(&self) -> &[CycleTrace] {
        &self.cycles
    }

    /// Runs one cycle: shift, predict, compute both candidates, correct,
    /// commit, convert. Errors abort the division.
    pub fn step(&mut self, selector: &DigitSelector) -> Result<(), SrtError> {
        let p_in = self.p;
        let rp = p_in.shl2()?;
        let (q_est, q_final) = selector.select(&rp, &self.d)?;
        let candidates = StepCandidates {
            p_keep: rp.sub(&self.d.mul_small(q_est.value() as i128)?)?,
            p_inc: rp.sub(&self.d.mul_small(q_est.value() as i128 + 1)?)?,
        };
        let p_out = if q_final == q_est.keep() {
            candidates.p_keep
        } else {
            candidates.p_inc
        };
        self.otf.append(q_final)?;
        self.digits.push(q_final);
        self.j += 1;
        if self.record_trace {
            self.cycles.push(CycleTrace {
                j: self.j,
                p_in,
                rp,
                q_est: q_est.value(),
                q_final: q_final.value(),
                p_keep: candidates.p_keep,
                p_inc: candidates.p_inc,
                p_out,
                a_bits: self.otf.a_bits(),
                b_bits: self.otf.b_bits(),
            });
        }
        // the tripwire: a digit that fails this bound is a selection bug
        if p_out.abs().scaled_cmp(RHO.1, &self.d, RHO.0) == std::cmp::Ordering::Greater {
            return Err(SrtError::ContainmentLost {
                j: self.j,
                p_next: p_out.to_string(),
                d: self.d.to_string(),
                cycles: std::mem::take(&mut self.cycles),
            });
        }
        self.p = p_out;
        Ok(())
    }
}

/// Outcome of a full division run.
#[derive(Debug, Clone)]
pub struct QuotientResult {
    /// The signed digit stream, most significant first.
    pub digits: Vec<QDigit>,
    /// Converted quotient after the final-remainder fix-up: exactly
    /// `floor((x/d) * 4^(m-1))`.
    pub quotient_bits: u128,
    /// Final partial remainder `p_m`, before the fix-up (the trace and the
    /// reconstruction identity use this value).
    pub remainder: FixedPoint,
    /// Whether the fix-up fired (negative final remainder: quotient was
    /// decremented one ulp and `d` belongs back in the remainder).
    pub remainder_negative: bool,
    /// Per-cycle records (empty if the config disabled tracing).
    pub cycles: Vec<CycleTrace>,
    n_iters: u32,
}

impl QuotientResult {
    /// True remainder after the fix-up: `p_m`, or `p_m + d` when negative.
    pub fn corrected_remainder(&self, d: &FixedPoint) -> Result<FixedPoint, SrtError> {
        if self.remainder_negative {
            Ok(self.remainder.add(d)?)
        } else {
            Ok(self.remainder)
        }
    }

    /// The quotient as an exact fixed-point value `quotient_bits / 4^(m-1)`,
    /// which approximates `x/d` from below to within `4^-(m-1)`.
    pub fn quotient_value(&self, frac_bits: u32) -> Result<FixedPoint, SrtError> {
        let shift = frac_bits
            .checked_sub(2 * (self.n_iters - 1))
            .ok_or(SrtError::BadIterationCount(self.n_iters))?;
        let raw = i128::try_from(self.quotient_bits)
            .ok()
            .and_then(|v| v.checked_shl(shift))
            .ok_or(SrtError::BadIterationCount(self.n_iters))?;
        Ok(FixedPoint::new(raw, frac_bits)?)
    }

    /// Exact division: the digit stream consumed `x` completely.
    pub fn is_exact(&self) -> bool {
        self.remainder.is_zero()
    }
}

/// Runs the full recurrence with the config's policy under default settings.
pub fn run_divide(
    x: &FixedPoint,
    d: &FixedPoint,
    cfg: &SrtConfig,
) -> Result<QuotientResult, SrtError> {
    run_divide_with(x, d, cfg, &DigitSelector::new(cfg.policy()))
}

/// Runs the full recurrence with a caller-built selector (custom fuzzy rules
/// or truncated comparisons).
pub fn run_divide_with(
    x: &FixedPoint,
    d: &FixedPoint,
    cfg: &SrtConfig,
    selector: &DigitSelector,
) -> Result<QuotientResult, SrtError> {
    let mut state = DivState::init(x, d, cfg)?;
    for _ in 0..cfg.n_iters() {
        state.step(selector)?;
    }
    let remainder_negative = state.p.is_negative();
    Ok(QuotientResult {
        quotient_bits: state.otf.finalize(remainder_negative),
        remainder: state.p,
        remainder_negative,
        digits: state.digits,
        cycles: state.cycles,
        n_iters: cfg.n_iters(),
    })
}

/// As [`run_divide`], but with explicit fuzzy rules when the policy is fuzzy.
pub fn run_divide_with_rules(
    x: &FixedPoint,
    d: &FixedPoint,
    cfg: &SrtConfig,
    rules: &FuzzyRuleSet,
) -> Result<QuotientResult, SrtError> {
    let selector = DigitSelector::with_rules(cfg.policy(), rules.clone());
    run_divide_with(x, d, cfg, &selector)
}

/// Per-cycle delay model: each iteration costs the slowest stage on the
/// dependency chain, plus a fixed pre/post overhead for the whole divide.
#[derive(Debug, Clone)]
pub struct LatencyModel {
    pub stage_ns: Vec<u64>,
    pub overhead_ns: u64,
}

/// `n_iters * max(stage delays) + overhead`, in nanoseconds. A planning
/// model: silicon numbers are inputs to match, never outputs to claim.
pub fn estimate_latency(cfg: &SrtConfig, model: &LatencyModel) -> Result<u64, SrtError> {
    let slowest = model.stage_ns.iter().copied().max();
    match slowest {
        Some(ns) if ns > 0 && model.stage_ns.iter().all(|&s| s > 0) => {
            Ok(cfg.n_iters() as u64 * ns + model.overhead_ns)
        }
        _ => Err(SrtError::BadLatencyModel),
    }
}

/// JSON export of a cycle trace: an array of cycle records.
pub fn trace_to_json(cycles: &[CycleTrace]) -> String {
    serde_json::to_string_pretty(cycles).expect("trace serialization cannot fail")
}

/// Delimited-text export: one comma-separated row per cycle, decimal values,
/// header row first.
pub fn trace_to_delimited(cycles: &[CycleTrace]) -> String {
    let mut out = String::from("j,p_in,rp,q_est,q_final,p_keep,p_inc,p_out,A_bits,B_bits\n");
    for c in cycles {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            c.j, c.p_in, c.rp, c.q_est, c.q_final, c.p_keep, c.p_inc, c.p_out, c.a_bits, c.b_bits
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fp(raw: i128, f: u32) -> FixedPoint {
        FixedPoint::new(raw, f).unwrap()
    }

    fn digits_of(result: &QuotientResult) -> Vec<i8> {
        result.digits.iter().map(|q| q.value()).collect()
    }

    #[test]
    fn init_scales_dividend_down_by_four() {
        let cfg = SrtConfig::new(4, Policy::Exact).unwrap();
        let st = DivState::init(&fp(1, 1), &fp(1, 1), &cfg).unwrap();
        assert_eq!(st.p(), &fp(1, 3)); // 0.125
        let st = DivState::init(&fp(3, 2), &fp(1, 1), &cfg).unwrap();
        assert_eq!(st.p(), &fp(3, 4)); // 0.1875
    }

    #[test]
    fn init_rejects_unnormalized_operands() {
        let cfg = SrtConfig::new(4, Policy::Exact).unwrap();
        let one = FixedPoint::from_int(1).unwrap();
        assert!(matches!(
            DivState::init(&one, &fp(1, 1), &cfg),
            Err(SrtError::UnnormalizedOperand {
                which: "dividend",
                ..
            })
        ));
        assert!(matches!(
            DivState::init(&fp(1, 1), &fp(1, 2), &cfg),
            Err(SrtError::UnnormalizedOperand {
                which: "divisor",
                ..
            })
        ));
    }

    #[test]
    fn config_validates_iteration_count() {
        assert!(SrtConfig::new(0, Policy::Exact).is_err());
        assert!(SrtConfig::new(61, Policy::Exact).is_err());
        assert!(SrtConfig::new(29, Policy::Exact).is_ok());
    }

    #[test]
    fn unity_quotient_digit_stream() {
        // 0.5 / 0.5: first digit 1 via the tie rule, then all zeros
        let cfg = SrtConfig::new(4, Policy::Exact).unwrap();
        let r = run_divide(&fp(1, 1), &fp(1, 1), &cfg).unwrap();
        assert_eq!(digits_of(&r), vec![1, 0, 0, 0]);
        assert!(r.is_exact());
        assert_eq!(r.quotient_bits, 64); // 4^3
        assert_eq!(
            r.quotient_value(16).unwrap(),
            FixedPoint::from_int(1).unwrap()
        );
        let t = &r.cycles[0];
        assert_eq!(t.rp, fp(1, 1));
        assert_eq!((t.q_est, t.q_final), (1, 1));
        assert!(t.p_out.is_zero());
    }

    #[test]
    fn three_halves_quotient_digit_stream() {
        // 0.75 / 0.5 under the exact rule: cycle 2 sees rp = 1.0, keeps
        // residual 0.5 > (2/3)*0.5, so the digit is bumped to 2
        let cfg = SrtConfig::new(4, Policy::Exact).unwrap();
        let r = run_divide(&fp(3, 2), &fp(1, 1), &cfg).unwrap();
        assert_eq!(digits_of(&r), vec![1, 2, 0, 0]);
        assert!(r.is_exact());
        let expected = fp(3, 1); // 1.5
        assert_eq!(r.quotient_value(16).unwrap(), expected);
        let t2 = &r.cycles[1];
        assert_eq!(t2.rp, FixedPoint::from_int(1).unwrap());
        assert_eq!((t2.q_est, t2.q_final), (1, 2));
    }

    #[test]
    fn zero_remainder_is_a_fixed_point() {
        let cfg = SrtConfig::new(8, Policy::Exact).unwrap();
        let r = run_divide(&fp(1, 1), &fp(1, 1), &cfg).unwrap();
        for t in &r.cycles[1..] {
            assert!(t.p_in.is_zero());
            assert_eq!((t.q_est, t.q_final), (0, 0));
            assert!(t.p_out.is_zero());
        }
    }

    #[test]
    fn trace_rows_satisfy_recurrence_and_candidate_relation() {
        let cfg = SrtConfig::new(12, Policy::Constants).unwrap();
        for (x_raw, d_raw) in [(137, 201), (255, 128), (129, 255), (200, 137)] {
            let x = fp(x_raw, 8);
            let d = fp(d_raw, 8);
            let r = run_divide(&x, &d, &cfg).unwrap();
            for t in &r.cycles {
                // rp = 4 * p_in
                assert_eq!(t.rp, t.p_in.shl2().unwrap());
                // p_out = rp - q_final * d, bit-exactly
                let expect = t.rp.sub(&d.mul_small(t.q_final as i128).unwrap()).unwrap();
                assert_eq!(t.p_out, expect);
                // p_keep - p_inc = d
                let diff = t.p_keep.sub(&t.p_inc).unwrap();
                assert_eq!(diff.cmp_value(&d), std::cmp::Ordering::Equal);
                // the committed remainder is one of the two candidates
                assert!(t.p_out == t.p_keep || t.p_out == t.p_inc);
                // registers carry two bits per digit
                assert_eq!(t.a_bits.len(), 2 * t.j as usize);
            }
        }
    }

    #[test]
    fn reconstruction_identity_exact_in_raw_space() {
        // p_m = 4^m * (x/4) - d * A  <=>  p_m.raw = 4^m*x.raw - 4*d.raw*A
        // (p lives two fractional bits below x)
        let cfg = SrtConfig::new(9, Policy::Exact).unwrap();
        for (x_raw, d_raw) in [(128, 128), (192, 128), (137, 201), (255, 130), (128, 255)] {
            let f = 8;
            let x = fp(x_raw, f);
            let d = fp(d_raw, f);
            let r = run_divide(&x, &d, &cfg).unwrap();
            let a_signed: i128 = r
                .digits
                .iter()
                .fold(0i128, |acc, q| 4 * acc + q.value() as i128);
            let m = r.digits.len() as u32;
            let lhs = r.remainder.raw();
            let rhs = (x.raw() << (2 * m)) - 4 * d.raw() * a_signed;
            assert_eq!(lhs, rhs, "x={x} d={d}");
        }
    }

    #[test]
    fn quotient_bits_agree_across_policies() {
        let mut seed = 0x9E3779B97F4A7C15u64;
        let mut next = || {
            seed ^= seed << 13;
            seed ^= seed >> 7;
            seed ^= seed << 17;
            seed
        };
        for _ in 0..200 {
            let f = 16;
            let x_raw = ((next() % (1 << (f - 1))) + (1 << (f - 1))) as i128;
            let d_raw = ((next() % (1 << (f - 1))) + (1 << (f - 1))) as i128;
            let x = fp(x_raw, f);
            let d = fp(d_raw, f);
            let mut bits = Vec::new();
            for policy in Policy::ALL {
                let cfg = SrtConfig::new(10, policy).unwrap().without_trace();
                let r = run_divide(&x, &d, &cfg).unwrap();
                bits.push(r.quotient_bits);
            }
            assert_eq!(bits[0], bits[1], "x={x} d={d}");
            assert_eq!(bits[0], bits[2], "x={x} d={d}");
        }
    }

    #[test]
    fn broken_selector_trips_the_containment_guard() {
        // one-bit residual truncation cannot see the 1/4 comparison constant;
        // the run must abort instead of emitting a bad digit
        let cfg = SrtConfig::new(6, Policy::Constants).unwrap();
        let selector = DigitSelector::new(Policy::Constants).with_truncation(1);
        let result = run_divide_with(&fp(7, 3), &fp(1, 1), &cfg, &selector);
        assert!(result.is_err());
    }

    #[test]
    fn latency_model_examples() {
        let cfg = SrtConfig::new(29, Policy::Exact).unwrap();
        let model = LatencyModel {
            stage_ns: vec![7],
            overhead_ns: 7,
        };
        assert_eq!(estimate_latency(&cfg, &model).unwrap(), 210);

        let cfg1 = SrtConfig::new(1, Policy::Exact).unwrap();
        let model = LatencyModel {
            stage_ns: vec![13],
            overhead_ns: 0,
        };
        assert_eq!(estimate_latency(&cfg1, &model).unwrap(), 13);

        // linearity: doubling all delays doubles the estimate
        let base = LatencyModel {
            stage_ns: vec![3, 7, 5],
            overhead_ns: 11,
        };
        let doubled = LatencyModel {
            stage_ns: vec![6, 14, 10],
            overhead_ns: 22,
        };
        assert_eq!(
            2 * estimate_latency(&cfg, &base).unwrap(),
            estimate_latency(&cfg, &doubled).unwrap()
        );

        let bad = LatencyModel {
            stage_ns: vec![],
            overhead_ns: 0,
        };
        assert!(estimate_latency(&cfg, &bad).is_err());
        let zero = LatencyModel {
            stage_ns: vec![7, 0],
            overhead_ns: 0,
        };
        assert!(estimate_latency(&cfg, &zero).is_err());
    }

    #[test]
    fn trace_exports_carry_exact_field_names() {
        let cfg = SrtConfig::new(3, Policy::Exact).unwrap();
        let r = run_divide(&fp(3, 2), &fp(1, 1), &cfg).unwrap();
        let json = trace_to_json(&r.cycles);
        for field in [
            "\"j\"",
            "\"p_in\"",
            "\"rp\"",
            "\"q_est\"",
            "\"q_final\"",
            "\"p_keep\"",
            "\"p_inc\"",
            "\"p_out\"",
            "\"A_bits\"",
            "\"B_bits\"",
        ] {
            assert!(json.contains(field), "missing {field}");
        }
        let parsed: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(parsed.as_array().unwrap().len(), 3);
        assert_eq!(parsed[0]["p_in"], "0.1875");

        let text = trace_to_delimited(&r.cycles);
        let mut lines = text.lines();
        assert_eq!(
            lines.next(),
            Some("j,p_in,rp,q_est,q_final,p_keep,p_inc,p_out,A_bits,B_bits")
        );
        assert_eq!(lines.count(), 3);
    }

    #[test]
    fn without_trace_skips_cycle_records() {
        let cfg = SrtConfig::new(6, Policy::Exact).unwrap().without_trace();
        let r = run_divide(&fp(3, 2), &fp(1, 1), &cfg).unwrap();
        assert!(r.cycles.is_empty());
        assert_eq!(r.digits.len(), 6);
    }
}
