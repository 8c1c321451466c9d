//! Verification campaign driver: oracle fuzzing, regression vectors, and
//! cross-policy comparison, with deterministic parallel execution.
//!
//! Every campaign is reproducible: case `i` of a run draws from its own
//! counter-mode stream of the seeded generator, so reports are identical
//! regardless of worker count, and serialized reports carry no wall-clock
//! content.

use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::fixedpoint::FixedPoint;
use crate::ieee754::{fdiv_with, Flags};
use crate::oracle::{platform_divide, reference_divide};
use crate::qds::{build_pd_map, in_overlap_band, residual, DigitSelector, Policy};
use crate::srt::{run_divide_with, SrtConfig};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },
    #[error("policy comparison requires frac_bits >= 8, got {0}")]
    BadResolution(u32),
    #[error("campaign needs at least one case")]
    EmptyCampaign,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One stored division case with oracle-produced expectations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegressionVector {
    pub label: String,
    pub a_bits: u64,
    pub b_bits: u64,
    pub expected_bits: u64,
    pub expected_flags: Flags,
}

impl RegressionVector {
    /// Builds a vector by running the reference oracle — expectations are
    /// computed, never hand-typed.
    pub fn from_oracle(label: &str, a_bits: u64, b_bits: u64) -> Self {
        let (expected_bits, expected_flags) = reference_divide(a_bits, b_bits);
        RegressionVector {
            label: label.to_string(),
            a_bits,
            b_bits,
            expected_bits,
            expected_flags,
        }
    }

    /// One line of the interchange format:
    /// `label a_hex b_hex expected_hex flags`.
    pub fn format_line(&self) -> String {
        format!(
            "{} {:016X} {:016X} {:016X} {}",
            self.label, self.a_bits, self.b_bits, self.expected_bits, self.expected_flags
        )
    }

    fn parse_line(path: &str, line_no: usize, line: &str) -> Result<Self, HarnessError> {
        let err = |msg: String| HarnessError::Parse {
            path: path.to_string(),
            line: line_no,
            msg,
        };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 5 {
            return Err(err(format!("expected 5 fields, found {}", fields.len())));
        }
        let word = |s: &str, what: &str| -> Result<u64, HarnessError> {
            u64::from_str_radix(s.trim_start_matches("0x").trim_start_matches("0X"), 16)
                .map_err(|e| err(format!("bad {what} '{s}': {e}")))
        };
        Ok(RegressionVector {
            label: fields[0].to_string(),
            a_bits: word(fields[1], "dividend")?,
            b_bits: word(fields[2], "divisor")?,
            expected_bits: word(fields[3], "expected result")?,
            expected_flags: fields[4]
                .parse()
                .map_err(|e| err(format!("bad flags '{}': {e}", fields[4])))?,
        })
    }
}

/// Parses a regression file: one vector per line, `#` comments and blank
/// lines ignored, errors reported with their line number.
pub fn parse_regression_file(path: &Path) -> Result<Vec<RegressionVector>, HarnessError> {
    let text = std::fs::read_to_string(path)?;
    parse_regression_text(&path.display().to_string(), &text)
}

/// As [`parse_regression_file`], over in-memory text.
pub fn parse_regression_text(
    path: &str,
    text: &str,
) -> Result<Vec<RegressionVector>, HarnessError> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        out.push(RegressionVector::parse_line(path, idx + 1, line)?);
    }
    Ok(out)
}

/// Serializes vectors to the interchange format, one per line.
pub fn format_regression_file(vectors: &[RegressionVector]) -> String {
    let mut out = String::new();
    for v in vectors {
        out.push_str(&v.format_line());
        out.push('\n');
    }
    out
}

/// One disagreement between the divider and an oracle.
#[derive(Debug, Clone, Serialize, PartialEq, Eq)]
pub struct Mismatch {
    pub case: String,
    pub a: String,
    pub b: String,
    pub got: String,
    pub expected: String,
    pub got_flags: String,
    pub expected_flags: String,
}

/// Outcome of a verification campaign. Serializes without the wall time, so
/// identical campaigns produce byte-identical reports.
#[derive(Debug, Clone, Serialize)]
pub struct CampaignReport {
    pub cases_run: u64,
    pub mismatches: Vec<Mismatch>,
    pub seed: u64,
    pub policy: String,
    /// Cases where policies legitimately diverged (cross-policy runs only).
    pub divergent_cases: u64,
    #[serde(skip)]
    pub wall_time: Duration,
}

impl CampaignReport {
    pub fn passed(&self) -> bool {
        self.mismatches.is_empty()
    }

    /// Deterministic JSON rendering of the report.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }
}

const FRAC_MASK: u64 = (1u64 << 52) - 1;

/// Curated operand list: specials, boundaries, powers of two, long runs of
/// ones, and the divisor of the famous broken-table ratio.
pub fn edge_case_operands() -> Vec<u64> {
    let mut ops = vec![
        0x0000000000000000, // +0
        0x8000000000000000, // -0
        0x7FF0000000000000, // +inf
        0xFFF0000000000000, // -inf
        0x7FF8000000000000, // quiet NaN
        0x7FF0000000000001, // signaling NaN
        0x0000000000000001, // min subnormal
        0x000FFFFFFFFFFFFF, // max subnormal
        0x0010000000000000, // min normal
        0x7FEFFFFFFFFFFFFF, // max finite
        0x3FF0000000000000, // 1.0
        0xBFF0000000000000, // -1.0
        0x3FF0000000000001, // 1.0 + ulp
        0x3FEFFFFFFFFFFFFF, // 1.0 - ulp/2
        0x4008000000000000, // 3.0
        0x3FD5555555555555, // ~1/3
        0x4340000000000000, // 2^53
        0x3CA0000000000000, // 2^-53
        0x0008000000000000, // subnormal with single leading one
        0x000AAAAAAAAAAAAA, // subnormal alternating bits
        4195835.0f64.to_bits(),
        3145727.0f64.to_bits(),
    ];
    // powers of two across the exponent range
    for e in [1u64, 100, 500, 1022, 1023, 1024, 1500, 2000, 2046] {
        ops.push(e << 52);
    }
    // significands that are long runs of ones (broken-table territory)
    for run in [20u64, 30, 40, 52] {
        ops.push((1022u64 << 52) | (FRAC_MASK >> (52 - run) << (52 - run)));
        ops.push((1023u64 << 52) | (FRAC_MASK >> (52 - run)));
    }
    ops
}

/// Every ordered pair from the curated list.
pub fn edge_case_pairs() -> Vec<(u64, u64)> {
    let ops = edge_case_operands();
    let mut pairs = Vec::with_capacity(ops.len() * ops.len());
    for &a in &ops {
        for &b in &ops {
            pairs.push((a, b));
        }
    }
    pairs
}

/// Deterministic operand pair for case `i`: four interleaved families —
/// uniform bit patterns, near-unity ratios, extreme exponent spreads, and
/// specials/subnormals.
fn gen_pair(seed: u64, i: u64) -> (u64, u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i);
    match i % 4 {
        0 => (rng.next_u64(), rng.next_u64()),
        1 => {
            // same binade, significands a few ulps apart, optional ones-run
            let exp = 1021 + (rng.next_u64() % 4);
            let mut frac = rng.next_u64() & FRAC_MASK;
            if rng.gen::<bool>() {
                let run = 16 + (rng.next_u64() % 37) as u32;
                frac |= FRAC_MASK >> (52 - run);
            }
            let b = (exp << 52) | frac;
            let delta = (rng.next_u64() % 257) as i64 - 128;
            let a = (b as i64).wrapping_add(delta) as u64;
            let sign = rng.next_u64() & (1 << 63);
            (a | sign, b)
        }
        2 => {
            // exponent spread chosen to stress overflow/underflow delivery
            let ea = 1 + rng.next_u64() % 120;
            let eb = 1926 + rng.next_u64() % 120;
            let (ea, eb) = if rng.gen::<bool>() {
                (eb, ea)
            } else {
                (ea, eb)
            };
            let a = (ea << 52) | (rng.next_u64() & FRAC_MASK);
            let b = (eb << 52) | (rng.next_u64() & FRAC_MASK);
            let signs = rng.next_u64() & (0b11 << 62);
            (a | (signs & (1 << 63)), b | ((signs & (1 << 62)) << 1))
        }
        _ => {
            static SPECIALS: std::sync::OnceLock<Vec<u64>> = std::sync::OnceLock::new();
            let specials = SPECIALS.get_or_init(edge_case_operands);
            let pick = |r: &mut ChaCha8Rng| {
                if r.gen::<u8>() % 3 == 0 {
                    // random subnormal
                    r.next_u64() & FRAC_MASK
                } else {
                    specials[r.gen::<usize>() % specials.len()]
                }
            };
            (pick(&mut rng), pick(&mut rng))
        }
    }
}

fn check_case(case: String, a: u64, b: u64, selector: &DigitSelector) -> Option<Mismatch> {
    let (got_bits, got_flags) = fdiv_with(a, b, selector);
    let platform_bits = platform_divide(a, b);
    let (ref_bits, ref_flags) = reference_divide(a, b);
    if got_bits == platform_bits && got_bits == ref_bits && got_flags == ref_flags {
        return None;
    }
    Some(Mismatch {
        case,
        a: format!("{a:016X}"),
        b: format!("{b:016X}"),
        got: format!("{got_bits:016X}"),
        expected: format!("{platform_bits:016X}/{ref_bits:016X}"),
        got_flags: got_flags.to_string(),
        expected_flags: ref_flags.to_string(),
    })
}

/// Fuzzes `n` operand pairs against both oracles under one policy.
/// Deterministic for a given (n, seed, policy); parallel internally.
pub fn fuzz_divide(n: u64, seed: u64, policy: Policy) -> Result<CampaignReport, HarnessError> {
    if n == 0 {
        return Err(HarnessError::EmptyCampaign);
    }
    let start = Instant::now();
    let selector = DigitSelector::new(policy);
    let mismatches: Vec<Mismatch> = (0..n)
        .into_par_iter()
        .filter_map(|i| {
            let (a, b) = gen_pair(seed, i);
            check_case(format!("case-{i}"), a, b, &selector)
        })
        .collect();
    Ok(CampaignReport {
        cases_run: n,
        mismatches,
        seed,
        policy: policy.label().to_string(),
        divergent_cases: 0,
        wall_time: start.elapsed(),
    })
}

/// Runs the curated edge-pair list (all ordered pairs) under one policy.
pub fn run_edge_cases(policy: Policy) -> CampaignReport {
    let start = Instant::now();
    let selector = DigitSelector::new(policy);
    let pairs = edge_case_pairs();
    let mismatches: Vec<Mismatch> = pairs
        .par_iter()
        .enumerate()
        .filter_map(|(i, &(a, b))| check_case(format!("edge-{i}"), a, b, &selector))
        .collect();
    CampaignReport {
        cases_run: pairs.len() as u64,
        mismatches,
        seed: 0,
        policy: policy.label().to_string(),
        divergent_cases: 0,
        wall_time: start.elapsed(),
    }
}

/// Executes every stored vector under every policy; a pass is an empty
/// mismatch list.
pub fn run_regressions(path: &Path) -> Result<CampaignReport, HarnessError> {
    let vectors = parse_regression_file(path)?;
    Ok(run_regression_vectors(&vectors))
}

/// As [`run_regressions`], over already-parsed vectors.
pub fn run_regression_vectors(vectors: &[RegressionVector]) -> CampaignReport {
    let start = Instant::now();
    let mut mismatches = Vec::new();
    let mut cases = 0u64;
    for policy in Policy::ALL {
        let selector = DigitSelector::new(policy);
        for v in vectors {
            cases += 1;
            let (got_bits, got_flags) = fdiv_with(v.a_bits, v.b_bits, &selector);
            if got_bits != v.expected_bits || got_flags != v.expected_flags {
                mismatches.push(Mismatch {
                    case: format!("{}[{}]", v.label, policy.label()),
                    a: format!("{:016X}", v.a_bits),
                    b: format!("{:016X}", v.b_bits),
                    got: format!("{got_bits:016X}"),
                    expected: format!("{:016X}", v.expected_bits),
                    got_flags: got_flags.to_string(),
                    expected_flags: v.expected_flags.to_string(),
                });
            }
        }
    }
    CampaignReport {
        cases_run: cases,
        mismatches,
        seed: 0,
        policy: "exact|constants|fuzzy".to_string(),
        divergent_cases: 0,
        wall_time: start.elapsed(),
    }
}

/// The famous broken-table ratio plus a generated family of near-unity
/// ratios whose divisor significands carry long runs of ones. Expectations
/// come from the reference oracle at generation time.
pub fn fdiv_regression_family() -> Vec<RegressionVector> {
    let mut vectors = vec![RegressionVector::from_oracle(
        "fdiv-4195835-3145727",
        4195835.0f64.to_bits(),
        3145727.0f64.to_bits(),
    )];
    // divisors 1.111...1xxx * 2^0 with runs of ones from 10 to 52 bits
    for run in (10..=52u64).step_by(6) {
        let ones = FRAC_MASK >> (52 - run) << (52 - run);
        let b = (1023u64 << 52) | ones;
        for (tag, a) in [
            ("self+1", b + 1),
            ("self+5", b + 5),
            ("self-3", b - 3),
            ("half-ulp", (1022u64 << 52) | ones | 1),
            ("top", (1023u64 << 52) | FRAC_MASK),
        ] {
            vectors.push(RegressionVector::from_oracle(
                &format!("ones{run}-{tag}"),
                a,
                b,
            ));
        }
    }
    // trailing-ones divisors close below a power of two
    for k in [1u64, 2, 3, 7, 15] {
        let b = (1023u64 << 52) | (FRAC_MASK - k);
        let a = (1023u64 << 52) | FRAC_MASK;
        vectors.push(RegressionVector::from_oracle(
            &format!("below-pow2-{k}"),
            a,
            b,
        ));
    }
    vectors
}

/// Sweeps the selection grid under all three policies, recording
/// cross-policy digit divergence. Violations (a divergence outside the
/// overlap band, or any containment failure) land in `mismatches`;
/// legitimate in-band divergence only counts. Full divides on a operand
/// subgrid then confirm rounded quotients agree across policies.
pub fn compare_policies(frac_bits: u32) -> Result<CampaignReport, HarnessError> {
    if frac_bits < 8 {
        return Err(HarnessError::BadResolution(frac_bits));
    }
    let start = Instant::now();
    let selectors: Vec<DigitSelector> =
        Policy::ALL.iter().map(|&p| DigitSelector::new(p)).collect();
    let maps: Vec<_> = selectors
        .iter()
        .map(|s| build_pd_map(frac_bits, frac_bits + 2, s))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| HarnessError::Parse {
            path: "<grid>".to_string(),
            line: 0,
            msg: e.to_string(),
        })?;

    let mut mismatches = Vec::new();
    let mut divergent = 0u64;
    let mut cases = 0u64;
    for idx in 0..maps[0].cells.len() {
        cases += 1;
        let base = &maps[0].cells[idx];
        let mut diverged = false;
        for m in &maps[1..] {
            let cell = &m.cells[idx];
            debug_assert!(cell.d == base.d && cell.rp == base.rp);
            if cell.q_final != base.q_final {
                diverged = true;
                let res =
                    residual(&base.rp, &base.d, base.q_est).map_err(|e| HarnessError::Parse {
                        path: "<grid>".to_string(),
                        line: 0,
                        msg: e.to_string(),
                    })?;
                if !in_overlap_band(&res, &base.d) {
                    mismatches.push(Mismatch {
                        case: "digit-divergence-outside-band".to_string(),
                        a: base.d.to_string(),
                        b: base.rp.to_string(),
                        got: cell.q_final.to_string(),
                        expected: base.q_final.to_string(),
                        got_flags: "-".to_string(),
                        expected_flags: "-".to_string(),
                    });
                }
            }
        }
        if diverged {
            divergent += 1;
        }
    }

    // rounded quotients must agree on full divides over an operand subgrid
    let cfg: Vec<SrtConfig> = Policy::ALL
        .iter()
        .map(|&p| SrtConfig::new(14, p).expect("fixed count").without_trace())
        .collect();
    let lo = 1i128 << (frac_bits - 1);
    let hi = 1i128 << frac_bits;
    let step = ((hi - lo) / 24).max(1);
    let mut x_raw = lo;
    while x_raw < hi {
        let mut d_raw = lo;
        while d_raw < hi {
            cases += 1;
            let x = FixedPoint::new(x_raw, frac_bits).expect("grid value");
            let d = FixedPoint::new(d_raw, frac_bits).expect("grid value");
            let mut bits = Vec::new();
            for (cfg, sel) in cfg.iter().zip(&selectors) {
                let r = run_divide_with(&x, &d, cfg, sel).map_err(|e| HarnessError::Parse {
                    path: "<divide>".to_string(),
                    line: 0,
                    msg: e.to_string(),
                })?;
                bits.push(r.quotient_bits);
            }
            if bits[1] != bits[0] || bits[2] != bits[0] {
                mismatches.push(Mismatch {
                    case: "quotient-divergence".to_string(),
                    a: x.to_string(),
                    b: d.to_string(),
                    got: format!("{}/{}", bits[1], bits[2]),
                    expected: bits[0].to_string(),
                    got_flags: "-".to_string(),
                    expected_flags: "-".to_string(),
                });
            }
            d_raw += step;
        }
        x_raw += step;
    }

    Ok(CampaignReport {
        cases_run: cases,
        mismatches,
        seed: 0,
        policy: "exact|constants|fuzzy".to_string(),
        divergent_cases: divergent,
        wall_time: start.elapsed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regression_vector_roundtrip() {
        let v = RegressionVector::from_oracle("one-third", 1.0f64.to_bits(), 3.0f64.to_bits());
        assert_eq!(v.expected_bits, 0x3FD5555555555555);
        let line = v.format_line();
        assert_eq!(
            line,
            "one-third 3FF0000000000000 4008000000000000 3FD5555555555555 inexact"
        );
        let parsed = parse_regression_text("mem", &line).unwrap();
        assert_eq!(parsed, vec![v]);
    }

    #[test]
    fn regression_parser_reports_line_numbers() {
        let text = "# header\nok 3FF0000000000000 4008000000000000 3FD5555555555555 inexact\nbroken 3FF0 xyz 0 -\n";
        match parse_regression_text("vectors.txt", text) {
            Err(HarnessError::Parse { path, line, msg }) => {
                assert_eq!(path, "vectors.txt");
                assert_eq!(line, 3);
                assert!(msg.contains("xyz"), "{msg}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
        let text = "short 3FF0000000000000 4008000000000000\n";
        assert!(matches!(
            parse_regression_text("v", text),
            Err(HarnessError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn empty_file_passes_vacuously() {
        let report = run_regression_vectors(&[]);
        assert_eq!(report.cases_run, 0);
        assert!(report.passed());
    }

    #[test]
    fn corrupted_expectation_is_detected() {
        let mut v = RegressionVector::from_oracle("sane", 1.0f64.to_bits(), 3.0f64.to_bits());
        v.expected_bits ^= 1;
        let report = run_regression_vectors(&[v]);
        assert_eq!(report.cases_run, 3); // one vector, three policies
        assert_eq!(report.mismatches.len(), 3);
        assert!(!report.passed());
    }

    #[test]
    fn fuzz_is_deterministic_and_clean() {
        let r1 = fuzz_divide(400, 7, Policy::Exact).unwrap();
        let r2 = fuzz_divide(400, 7, Policy::Exact).unwrap();
        assert!(r1.passed(), "{:?}", r1.mismatches.first());
        assert_eq!(r1.to_json(), r2.to_json());
        // a different seed draws different operands
        let r3 = fuzz_divide(400, 8, Policy::Exact).unwrap();
        assert!(r3.passed());
        assert_ne!(
            (gen_pair(7, 0), gen_pair(7, 1)),
            (gen_pair(8, 0), gen_pair(8, 1))
        );
    }

    #[test]
    fn fuzz_covers_all_policies() {
        for policy in [Policy::Constants, Policy::Fuzzy] {
            let r = fuzz_divide(200, 11, policy).unwrap();
            assert!(r.passed(), "{policy}: {:?}", r.mismatches.first());
        }
    }

    #[test]
    fn fuzz_requires_cases() {
        assert!(matches!(
            fuzz_divide(0, 1, Policy::Exact),
            Err(HarnessError::EmptyCampaign)
        ));
    }

    #[test]
    fn edge_pairs_pass_everywhere() {
        for policy in Policy::ALL {
            let report = run_edge_cases(policy);
            assert!(report.cases_run >= 1000);
            assert!(report.passed(), "{policy}: {:?}", report.mismatches.first());
        }
    }

    #[test]
    fn regression_family_passes() {
        let family = fdiv_regression_family();
        assert!(family.len() > 30);
        assert_eq!(family[0].label, "fdiv-4195835-3145727");
        let report = run_regression_vectors(&family);
        assert!(report.passed(), "{:?}", report.mismatches.first());
    }

    #[test]
    fn policy_comparison_confines_divergence_to_band() {
        let report = compare_policies(8).unwrap();
        assert!(report.passed(), "{:?}", report.mismatches.first());
        assert!(
            report.divergent_cases > 0,
            "policies should disagree in-band"
        );
        assert!(compare_policies(7).is_err());
    }

    #[test]
    fn report_json_is_stable_content() {
        let report = fuzz_divide(10, 3, Policy::Exact).unwrap();
        let json = report.to_json();
        assert!(json.contains("\"cases_run\": 10"));
        assert!(json.contains("\"seed\": 3"));
        assert!(json.contains("\"policy\": \"exact\""));
        assert!(!json.contains("wall_time"));
    }
}
