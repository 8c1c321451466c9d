//! Quotient digit selection for the radix-4 recurrence.
//!
//! A cheap four-way comparison predicts an interim digit from the shifted
//! partial remainder alone; a correction stage then decides between the
//! prediction and its successor. Three interchangeable correction policies
//! are provided:
//!
//! * `exact` — the containment-based reference rule, compared with exact
//!   rational arithmetic;
//! * `constants` — the hardware-shaped rule comparing the residual against
//!   one of two constants chosen by the divisor's leading bits;
//! * `fuzzy` — a Mamdani-inference resolver for the overlap band (see the
//!   [`crate::fuzzy`] module).
//!
//! The module also builds P-D region maps and runs the exhaustive grid
//! certification that every policy keeps the next partial remainder inside
//! `(2/3)·d` — the invariant whose violation is the classic lookup-table
//! divider failure.

use std::cmp::Ordering;
use std::fmt;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::fixedpoint::{FixedPoint, FixedPointError};
use crate::fuzzy::{self, FuzzyError, FuzzyRuleSet};

#[derive(Debug, Error)]
pub enum QdsError {
    #[error("shifted remainder {rp} outside the admissible open range (-8/3, 8/3)")]
    RemainderOutOfRange { rp: String },
    #[error("divisor {d} outside [1/2, 1)")]
    DivisorOutOfRange { d: String },
    #[error("|rp| exceeds (8/3)*d (rp={rp}, d={d})")]
    RemainderVsDivisor { rp: String, d: String },
    #[error("estimate {qe} infeasible at rp={rp}, d={d}: chosen digit breaks containment")]
    InfeasibleEstimate { qe: i8, rp: String, d: String },
    #[error("digit {0} outside the radix-4 signed digit set -2..2")]
    DigitOutOfRange(i8),
    #[error("estimated digit {0} outside -2..1")]
    EstDigitOutOfRange(i8),
    #[error("containment sweep requires frac_bits >= 8, got {0}")]
    SweepResolution(u32),
    #[error(transparent)]
    Fixed(#[from] FixedPointError),
    #[error(transparent)]
    Fuzzy(#[from] FuzzyError),
}

/// A quotient digit in the maximally redundant radix-4 set {-2..2}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct QDigit(i8);

impl QDigit {
    pub const ZERO: QDigit = QDigit(0);

    pub fn new(value: i8) -> Result<Self, QdsError> {
        if (-2..=2).contains(&value) {
            Ok(QDigit(value))
        } else {
            Err(QdsError::DigitOutOfRange(value))
        }
    }

    pub fn value(self) -> i8 {
        self.0
    }
}

impl fmt::Display for QDigit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// An estimated (interim) digit in {-2..1}; the final digit is this value or
/// this value plus one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct EstDigit(i8);

impl EstDigit {
    pub fn new(value: i8) -> Result<Self, QdsError> {
        if (-2..=1).contains(&value) {
            Ok(EstDigit(value))
        } else {
            Err(QdsError::EstDigitOutOfRange(value))
        }
    }

    pub fn value(self) -> i8 {
        self.0
    }

    /// The digit kept as-is.
    pub fn keep(self) -> QDigit {
        QDigit(self.0)
    }

    /// The digit bumped by one; {-2..1}+1 always lands inside {-2..2}.
    pub fn increment(self) -> QDigit {
        QDigit(self.0 + 1)
    }
}

impl fmt::Display for EstDigit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Digit-correction strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    Exact,
    Constants,
    Fuzzy,
}

impl Policy {
    pub const ALL: [Policy; 3] = [Policy::Exact, Policy::Constants, Policy::Fuzzy];

    pub fn label(self) -> &'static str {
        match self {
            Policy::Exact => "exact",
            Policy::Constants => "constants",
            Policy::Fuzzy => "fuzzy",
        }
    }
}

impl std::str::FromStr for Policy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exact" => Ok(Policy::Exact),
            "constants" => Ok(Policy::Constants),
            "fuzzy" => Ok(Policy::Fuzzy),
            other => Err(format!(
                "unknown policy '{other}' (expected exact, constants, or fuzzy)"
            )),
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// The fixed comparison constants of the selection logic.
///
/// `c`/`c_prime` are the prediction thresholds at +-1/2; `C1`/`C2` are the
/// correction constants 1/4 and 1/2, switched at the divisor split 3/4; `rho`
/// is the redundancy factor 2/3 fixed by radix 4 with digit bound 2.
#[derive(Debug, Clone)]
pub struct SelectionConstants {
    pub c: FixedPoint,
    pub c_prime: FixedPoint,
    pub c1: FixedPoint,
    pub c2: FixedPoint,
    pub rho: (i128, i128),
    pub d_split: FixedPoint,
}

impl Default for SelectionConstants {
    fn default() -> Self {
        SelectionConstants {
            c: FixedPoint::new(1, 1).expect("0.5"),
            c_prime: FixedPoint::new(-1, 1).expect("-0.5"),
            c1: FixedPoint::new(1, 2).expect("0.25"),
            c2: FixedPoint::new(1, 1).expect("0.5"),
            rho: (2, 3),
            d_split: FixedPoint::new(3, 2).expect("0.75"),
        }
    }
}

/// `rp - qe*d`, exactly.
pub fn residual(rp: &FixedPoint, d: &FixedPoint, qe: EstDigit) -> Result<FixedPoint, QdsError> {
    Ok(rp.sub(&d.mul_small(qe.value() as i128)?)?)
}

/// True iff `|p_next| <= (2/3)*d`, compared exactly as `3|p_next| <= 2d`.
pub fn containment_ok(p_next: &FixedPoint, d: &FixedPoint) -> bool {
    p_next.abs().scaled_cmp(3, d, 2) != Ordering::Greater
}

/// True iff the residual lies in the closed overlap band `[(1/3)d, (2/3)d]`.
pub fn in_overlap_band(residual: &FixedPoint, d: &FixedPoint) -> bool {
    residual.scaled_cmp(3, d, 1) != Ordering::Less
        && residual.scaled_cmp(3, d, 2) != Ordering::Greater
}

fn check_divisor(d: &FixedPoint) -> Result<(), QdsError> {
    let one = FixedPoint::from_int(1).expect("1");
    if d.scaled_cmp(2, &one, 1) == Ordering::Less || d.cmp_value(&one) != Ordering::Less {
        return Err(QdsError::DivisorOutOfRange { d: d.to_string() });
    }
    Ok(())
}

fn check_rp_vs_divisor(rp: &FixedPoint, d: &FixedPoint) -> Result<(), QdsError> {
    if rp.abs().scaled_cmp(3, d, 8) == Ordering::Greater {
        return Err(QdsError::RemainderVsDivisor {
            rp: rp.to_string(),
            d: d.to_string(),
        });
    }
    Ok(())
}

/// Predicts the interim digit from the shifted remainder alone.
///
/// Thresholds are 0 and +-1/2; ties go to the upper region, so `rp = 1/2`
/// predicts 1 and `rp = -1/2` predicts -1. Either choice at a tie is
/// containment-valid; picking the upper one makes the map deterministic.
pub fn predict_digit(rp: &FixedPoint) -> Result<EstDigit, QdsError> {
    let bound = FixedPoint::from_int(8).expect("8");
    if rp.abs().scaled_cmp(3, &bound, 1) != Ordering::Less {
        return Err(QdsError::RemainderOutOfRange { rp: rp.to_string() });
    }
    let half = FixedPoint::new(1, 1).expect("0.5");
    let zero = FixedPoint::zero(0);
    let v = if rp.cmp_value(&half) != Ordering::Less {
        1
    } else if rp.cmp_value(&zero) != Ordering::Less {
        0
    } else if rp.cmp_value(&half.neg()) != Ordering::Less {
        -1
    } else {
        -2
    };
    Ok(EstDigit(v))
}

/// Containment-based reference correction: bump the estimate exactly when
/// `rp > (qe + 2/3)*d`, i.e. `3*rp > (3*qe + 2)*d`.
pub fn correct_digit_exact(
    rp: &FixedPoint,
    d: &FixedPoint,
    qe: EstDigit,
) -> Result<QDigit, QdsError> {
    check_divisor(d)?;
    check_rp_vs_divisor(rp, d)?;
    let q = if rp.scaled_cmp(3, d, 3 * qe.value() as i128 + 2) == Ordering::Greater {
        qe.increment()
    } else {
        qe.keep()
    };
    ensure_contained(rp, d, qe, q)?;
    Ok(q)
}

/// Comparison-constant correction: bump the estimate when the residual
/// reaches 1/4 (divisors in [1/2, 3/4)) or 1/2 (divisors in [3/4, 1)).
pub fn correct_digit_constants(
    rp: &FixedPoint,
    d: &FixedPoint,
    qe: EstDigit,
) -> Result<QDigit, QdsError> {
    correct_digit_constants_trunc(rp, d, qe, None)
}

/// As [`correct_digit_constants`], but optionally truncating the residual to
/// `t` fractional bits (toward minus infinity, as dropped two's-complement
/// bits would) before the comparison. Lets the sweep certify how much
/// residual precision the rule actually needs.
pub fn correct_digit_constants_trunc(
    rp: &FixedPoint,
    d: &FixedPoint,
    qe: EstDigit,
    truncate_bits: Option<u32>,
) -> Result<QDigit, QdsError> {
    check_divisor(d)?;
    check_rp_vs_divisor(rp, d)?;
    let consts = SelectionConstants::default();
    let res = residual(rp, d, qe)?;
    let res = match truncate_bits {
        Some(t) if res.frac_bits() > t => FixedPoint::new(res.raw() >> (res.frac_bits() - t), t)?,
        _ => res,
    };
    let threshold = if d.cmp_value(&consts.d_split) == Ordering::Less {
        &consts.c1
    } else {
        &consts.c2
    };
    let q = if res.cmp_value(threshold) != Ordering::Less {
        qe.increment()
    } else {
        qe.keep()
    };
    ensure_contained(rp, d, qe, q)?;
    Ok(q)
}

fn ensure_contained(
    rp: &FixedPoint,
    d: &FixedPoint,
    qe: EstDigit,
    q: QDigit,
) -> Result<(), QdsError> {
    let p_next = rp.sub(&d.mul_small(q.value() as i128)?)?;
    if containment_ok(&p_next, d) {
        Ok(())
    } else {
        Err(QdsError::InfeasibleEstimate {
            qe: qe.value(),
            rp: rp.to_string(),
            d: d.to_string(),
        })
    }
}

/// Prediction plus correction under one of the three policies.
#[derive(Debug, Clone)]
pub struct DigitSelector {
    policy: Policy,
    rules: FuzzyRuleSet,
    truncate_bits: Option<u32>,
}

impl DigitSelector {
    pub fn new(policy: Policy) -> Self {
        DigitSelector {
            policy,
            rules: FuzzyRuleSet::default(),
            truncate_bits: None,
        }
    }

    /// Fuzzy policy with a caller-supplied rule set.
    pub fn with_rules(policy: Policy, rules: FuzzyRuleSet) -> Self {
        DigitSelector {
            policy,
            rules,
            truncate_bits: None,
        }
    }

    /// Truncate residual comparisons (constants policy) to `t` fractional bits.
    pub fn with_truncation(mut self, t: u32) -> Self {
        self.truncate_bits = Some(t);
        self
    }

    pub fn policy(&self) -> Policy {
        self.policy
    }

    pub fn rules(&self) -> &FuzzyRuleSet {
        &self.rules
    }

    /// Predicts and corrects one digit for the shifted remainder `rp` against
    /// divisor `d`. Requires `d` in [1/2, 1) and `|rp| <= (8/3)*d`.
    pub fn select(&self, rp: &FixedPoint, d: &FixedPoint) -> Result<(EstDigit, QDigit), QdsError> {
        check_divisor(d)?;
        check_rp_vs_divisor(rp, d)?;
        let qe = predict_digit(rp)?;
        let q = match self.policy {
            Policy::Exact => correct_digit_exact(rp, d, qe)?,
            Policy::Constants => correct_digit_constants_trunc(rp, d, qe, self.truncate_bits)?,
            Policy::Fuzzy => {
                let q = fuzzy::fuzzy_decide(rp, d, qe, &self.rules)?;
                ensure_contained(rp, d, qe, q)?;
                q
            }
        };
        Ok((qe, q))
    }
}

/// One cell of a P-D region map.
#[derive(Debug, Clone)]
pub struct PdCell {
    pub d: FixedPoint,
    pub rp: FixedPoint,
    pub q_est: EstDigit,
    pub q_final: QDigit,
    pub in_overlap: bool,
}

/// Grid enumeration of the selection function over the admissible
/// (divisor, shifted remainder) plane.
#[derive(Debug, Clone)]
pub struct PdRegionMap {
    pub cells: Vec<PdCell>,
    pub res_d: u32,
    pub res_p: u32,
    pub policy: Policy,
}

impl PdRegionMap {
    /// Delimited-text export: `d,rp,q_est,q_final,in_overlap` per cell,
    /// decimal values, the overlap flag as 0/1, header row first.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.cells.len() * 32 + 64);
        out.push_str("d,rp,q_est,q_final,in_overlap\n");
        for c in &self.cells {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                c.d,
                c.rp,
                c.q_est,
                c.q_final,
                u8::from(c.in_overlap)
            ));
        }
        out
    }
}

/// Enumerates digit selections over d in [1/2, 1) step `2^-res_d` and
/// rp in [-(8/3)d, (8/3)d] step `2^-res_p`, flagging overlap-band cells.
pub fn build_pd_map(
    res_d: u32,
    res_p: u32,
    selector: &DigitSelector,
) -> Result<PdRegionMap, QdsError> {
    let rows: Vec<Result<Vec<PdCell>, QdsError>> = divisor_grid(res_d)
        .into_par_iter()
        .map(|d_raw| {
            let d = FixedPoint::new(d_raw, res_d)?;
            // |rp| <= (8/3)d on the 2^-res_p grid
            let rp_max = (8 * d_raw << res_p) / (3 << res_d);
            let mut cells = Vec::with_capacity(2 * rp_max as usize + 1);
            for rp_raw in -rp_max..=rp_max {
                let rp = FixedPoint::new(rp_raw, res_p)?;
                let (qe, q) = selector.select(&rp, &d)?;
                let res = residual(&rp, &d, qe)?;
                cells.push(PdCell {
                    d,
                    rp,
                    q_est: qe,
                    q_final: q,
                    in_overlap: in_overlap_band(&res, &d),
                });
            }
            Ok(cells)
        })
        .collect();
    let mut cells = Vec::new();
    for row in rows {
        cells.extend(row?);
    }
    Ok(PdRegionMap {
        cells,
        res_d,
        res_p,
        policy: selector.policy(),
    })
}

/// A containment failure found by the sweep: the chosen digit left the next
/// partial remainder outside `(2/3)*d`.
#[derive(Debug, Clone, Serialize)]
pub struct SweepViolation {
    pub d: String,
    pub rp: String,
    pub q_chosen: i8,
    pub p_next: String,
}

/// Result of an exhaustive grid certification run.
#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub cells_checked: u64,
    pub violations: Vec<SweepViolation>,
    pub policies_compared: Vec<String>,
}

/// Exhaustive containment certification on a square grid (`frac_bits` for
/// both axes). Violations are report content, never errors.
pub fn sweep_containment(
    frac_bits: u32,
    selector: &DigitSelector,
) -> Result<ValidationReport, QdsError> {
    if frac_bits < 8 {
        return Err(QdsError::SweepResolution(frac_bits));
    }
    sweep_containment_grid(frac_bits, frac_bits, selector)
}

/// Containment certification over d in [1/2, 1) step `2^-d_frac_bits` and
/// partial-remainder states p with |p| <= (2/3)d step `2^-p_frac_bits`.
/// For every state the full step is simulated: shift, select, subtract,
/// check `|p'| <= (2/3)d`.
pub fn sweep_containment_grid(
    d_frac_bits: u32,
    p_frac_bits: u32,
    selector: &DigitSelector,
) -> Result<ValidationReport, QdsError> {
    let rows: Vec<Result<(u64, Vec<SweepViolation>), QdsError>> = divisor_grid(d_frac_bits)
        .into_par_iter()
        .map(|d_raw| {
            let d = FixedPoint::new(d_raw, d_frac_bits)?;
            let p_max = (2 * d_raw << p_frac_bits) / (3 << d_frac_bits);
            let mut checked = 0u64;
            let mut violations = Vec::new();
            for p_raw in -p_max..=p_max {
                let p = FixedPoint::new(p_raw, p_frac_bits)?;
                let rp = p.shl2()?;
                let (_, q) = selector.select(&rp, &d)?;
                let p_next = rp.sub(&d.mul_small(q.value() as i128)?)?;
                checked += 1;
                if !containment_ok(&p_next, &d) {
                    violations.push(SweepViolation {
                        d: d.to_string(),
                        rp: rp.to_string(),
                        q_chosen: q.value(),
                        p_next: p_next.to_string(),
                    });
                }
            }
            Ok((checked, violations))
        })
        .collect();
    let mut report = ValidationReport {
        cells_checked: 0,
        violations: Vec::new(),
        policies_compared: vec![selector.policy().label().to_string()],
    };
    for row in rows {
        let (checked, violations) = row?;
        report.cells_checked += checked;
        report.violations.extend(violations);
    }
    Ok(report)
}

fn divisor_grid(d_frac_bits: u32) -> Vec<i128> {
    let lo = 1i128 << (d_frac_bits - 1);
    let hi = 1i128 << d_frac_bits;
    (lo..hi).collect()
}
