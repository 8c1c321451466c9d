//! Mamdani fuzzy resolver for the digit-correction overlap band.
//!
//! When the residual `rp - qe*d` lands strictly between `(1/3)*d` and
//! `(2/3)*d`, both the estimated digit and its successor keep the recurrence
//! contained, and the choice is free. This module resolves that band with a
//! two-rule Mamdani controller:
//!
//! 1. normalize the residual position inside the band to `u` in [0, 1];
//! 2. fuzzify `u` against the `keep`/`increment` input memberships;
//! 3. clip each output membership at its rule activation (min), merge the
//!    clipped curves (max);
//! 4. defuzzify by centroid; increment exactly when the centroid exceeds 1/2.
//!
//! Band membership itself is decided with exact rational comparisons; only
//! the free choice inside the band uses floating point, so no inference
//! rounding can ever produce an uncontained digit.

use std::cmp::Ordering;

use thiserror::Error;

use crate::fixedpoint::FixedPoint;
use crate::qds::{residual, EstDigit, QDigit};

#[derive(Debug, Error)]
pub enum FuzzyError {
    #[error("aggregated output is identically zero; centroid undefined")]
    EmptyAggregate,
    #[error("membership function needs at least two points")]
    TooFewPoints,
    #[error("membership x-coordinates must be finite and strictly increasing")]
    UnsortedPoints,
    #[error("membership grades must be finite and lie in [0, 1]")]
    GradeOutOfRange,
    #[error("defuzzification grid must have 2..=65536 intervals, got {0}")]
    BadGrid(u32),
    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },
}

/// Piecewise-linear membership function on breakpoints with grades in [0, 1].
/// Outside the breakpoint span the nearest endpoint grade holds.
#[derive(Debug, Clone, PartialEq)]
pub struct MembershipFn {
    points: Vec<(f64, f64)>,
}

impl MembershipFn {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self, FuzzyError> {
        if points.len() < 2 {
            return Err(FuzzyError::TooFewPoints);
        }
        for w in points.windows(2) {
            if !(w[0].0 < w[1].0) || !w[0].0.is_finite() || !w[1].0.is_finite() {
                return Err(FuzzyError::UnsortedPoints);
            }
        }
        for &(_, mu) in &points {
            if !mu.is_finite() || !(0.0..=1.0).contains(&mu) {
                return Err(FuzzyError::GradeOutOfRange);
            }
        }
        Ok(MembershipFn { points })
    }

    /// A ramp between two breakpoints.
    pub fn ramp(x0: f64, mu0: f64, x1: f64, mu1: f64) -> Self {
        MembershipFn::new(vec![(x0, mu0), (x1, mu1)]).expect("valid ramp")
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn eval(&self, x: f64) -> f64 {
        let first = self.points[0];
        let last = self.points[self.points.len() - 1];
        if x <= first.0 {
            return first.1;
        }
        if x >= last.0 {
            return last.1;
        }
        for w in self.points.windows(2) {
            let (x0, mu0) = w[0];
            let (x1, mu1) = w[1];
            if x <= x1 {
                return mu0 + (x - x0) * ((mu1 - mu0) / (x1 - x0));
            }
        }
        last.1
    }
}

/// Input and output memberships for the two rules, plus the centroid grid.
///
/// Rule 1: residual low in the band  -> keep the estimate.
/// Rule 2: residual high in the band -> increment the estimate.
#[derive(Debug, Clone)]
pub struct FuzzyRuleSet {
    pub input_keep: MembershipFn,
    pub input_increment: MembershipFn,
    pub output_keep: MembershipFn,
    pub output_increment: MembershipFn,
    /// Number of grid intervals for centroid defuzzification (grid has
    /// `grid_n + 1` samples). Powers of two keep the sample points exact.
    pub grid_n: u32,
}

impl Default for FuzzyRuleSet {
    fn default() -> Self {
        FuzzyRuleSet {
            input_keep: MembershipFn::ramp(0.0, 1.0, 1.0, 0.0),
            input_increment: MembershipFn::ramp(0.0, 0.0, 1.0, 1.0),
            output_keep: MembershipFn::ramp(0.0, 1.0, 1.0, 0.0),
            output_increment: MembershipFn::ramp(0.0, 0.0, 1.0, 1.0),
            grid_n: 256,
        }
    }
}

const GRID_MAX: u32 = 1 << 16;

impl FuzzyRuleSet {
    /// Parses a rule-set description. One assignment per line:
    ///
    /// ```text
    /// # comment
    /// grid_n: 512
    /// input_keep: 0,1; 1,0
    /// output_increment: 0,0; 0.5,0.2; 1,1
    /// ```
    ///
    /// Memberships not mentioned keep their defaults.
    pub fn from_config_str(s: &str) -> Result<Self, FuzzyError> {
        let mut rules = FuzzyRuleSet::default();
        for (idx, raw_line) in s.lines().enumerate() {
            let line = idx + 1;
            let text = raw_line.trim();
            if text.is_empty() || text.starts_with('#') {
                continue;
            }
            let (name, value) = text.split_once(':').ok_or_else(|| FuzzyError::Config {
                line,
                msg: "expected 'name: ...'".to_string(),
            })?;
            let name = name.trim();
            let value = value.trim();
            if name == "grid_n" {
                let n: u32 = value.parse().map_err(|e| FuzzyError::Config {
                    line,
                    msg: format!("bad grid size '{value}': {e}"),
                })?;
                if !(2..=GRID_MAX).contains(&n) {
                    return Err(FuzzyError::Config {
                        line,
                        msg: format!("grid size {n} outside 2..={GRID_MAX}"),
                    });
                }
                rules.grid_n = n;
                continue;
            }
            let mut points = Vec::new();
            for pair in value.split(';') {
                let pair = pair.trim();
                let (x, mu) = pair.split_once(',').ok_or_else(|| FuzzyError::Config {
                    line,
                    msg: format!("expected 'x,mu' pair, got '{pair}'"),
                })?;
                let parse = |s: &str| -> Result<f64, FuzzyError> {
                    s.trim().parse().map_err(|e| FuzzyError::Config {
                        line,
                        msg: format!("bad number '{}': {e}", s.trim()),
                    })
                };
                points.push((parse(x)?, parse(mu)?));
            }
            let mf = MembershipFn::new(points).map_err(|e| FuzzyError::Config {
                line,
                msg: e.to_string(),
            })?;
            match name {
                "input_keep" => rules.input_keep = mf,
                "input_increment" => rules.input_increment = mf,
                "output_keep" => rules.output_keep = mf,
                "output_increment" => rules.output_increment = mf,
                other => {
                    return Err(FuzzyError::Config {
                        line,
                        msg: format!("unknown membership '{other}'"),
                    })
                }
            }
        }
        Ok(rules)
    }
}

/// Maps the residual to its position in the overlap band:
/// `u = clamp(((rp - qe*d)/d - 1/3) * 3, 0, 1)`, so the band floor is 0 and
/// the band ceiling is 1. Floating point; used only for the free choice.
pub fn normalize_residual(rp: &FixedPoint, d: &FixedPoint, qe: EstDigit) -> f64 {
    let res = residual(rp, d, qe).expect("residual fits the working format");
    let ratio = res.to_f64() / d.to_f64();
    ((ratio - 1.0 / 3.0) * 3.0).clamp(0.0, 1.0)
}

/// Rule activations for band position `u`: (keep grade, increment grade).
pub fn fuzzify(u: f64, rules: &FuzzyRuleSet) -> (f64, f64) {
    (rules.input_keep.eval(u), rules.input_increment.eval(u))
}

/// The merged output fuzzy set: each output membership clipped at its rule
/// activation, combined pointwise by max.
#[derive(Debug, Clone)]
pub struct AggregatedOutput<'a> {
    alpha_keep: f64,
    alpha_increment: f64,
    output_keep: &'a MembershipFn,
    output_increment: &'a MembershipFn,
}

impl AggregatedOutput<'_> {
    pub fn eval(&self, y: f64) -> f64 {
        let keep = self.alpha_keep.min(self.output_keep.eval(y));
        let inc = self.alpha_increment.min(self.output_increment.eval(y));
        keep.max(inc)
    }
}

/// Min-clip each output set at its activation and max-merge the two.
pub fn mamdani_aggregate<'a>(
    mu_keep: f64,
    mu_increment: f64,
    rules: &'a FuzzyRuleSet,
) -> AggregatedOutput<'a> {
    AggregatedOutput {
        alpha_keep: mu_keep,
        alpha_increment: mu_increment,
        output_keep: &rules.output_keep,
        output_increment: &rules.output_increment,
    }
}

/// Centroid of the aggregated set, sampled at `grid_n + 1` evenly spaced
/// points on [0, 1].
///
/// The numerator is accumulated over mirror pairs around 1/2, so a
/// mirror-symmetric aggregate defuzzifies to exactly 1/2 — ties stay ties
/// instead of drifting on summation order.
pub fn defuzzify_centroid(agg: &AggregatedOutput<'_>, grid_n: u32) -> Result<f64, FuzzyError> {
    if !(2..=GRID_MAX).contains(&grid_n) {
        return Err(FuzzyError::BadGrid(grid_n));
    }
    let n = grid_n as usize;
    let samples: Vec<f64> = (0..=n).map(|i| agg.eval(i as f64 / n as f64)).collect();
    let denom: f64 = samples.iter().sum();
    if denom == 0.0 {
        return Err(FuzzyError::EmptyAggregate);
    }
    let mut num = 0.0f64;
    for i in 0..n - n / 2 {
        let j = n - i;
        let y_off = j as f64 / n as f64 - 0.5;
        num += y_off * (samples[j] - samples[i]);
    }
    Ok((0.5 + num / denom).clamp(0.0, 1.0))
}

/// Full pipeline for a band position: fuzzify, aggregate, defuzzify.
pub fn aggregate_centroid(u: f64, rules: &FuzzyRuleSet) -> Result<f64, FuzzyError> {
    let (mu_keep, mu_inc) = fuzzify(u, rules);
    let agg = mamdani_aggregate(mu_keep, mu_inc, rules);
    defuzzify_centroid(&agg, rules.grid_n)
}

/// Chooses between the estimate and its successor.
///
/// Residuals at or below the band floor keep, residuals strictly above the
/// band ceiling increment — both decided with exact comparisons. Inside the
/// band (ceiling included) the Mamdani pipeline decides: increment exactly
/// when the centroid exceeds 1/2, so a perfectly centered residual keeps.
pub fn fuzzy_decide(
    rp: &FixedPoint,
    d: &FixedPoint,
    qe: EstDigit,
    rules: &FuzzyRuleSet,
) -> Result<QDigit, FuzzyError> {
    let res = residual(rp, d, qe).expect("residual fits the working format");
    if res.scaled_cmp(3, d, 1) != Ordering::Greater {
        return Ok(qe.keep());
    }
    if res.scaled_cmp(3, d, 2) == Ordering::Greater {
        return Ok(qe.increment());
    }
    let u = normalize_residual(rp, d, qe);
    let y_star = aggregate_centroid(u, rules)?;
    Ok(if y_star > 0.5 {
        qe.increment()
    } else {
        qe.keep()
    })
}
