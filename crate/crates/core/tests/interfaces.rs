//! Contract tests for everything that crosses the crate boundary as text:
//! trace exports, selection-map CSV, campaign reports, regression files, and
//! fuzzy rule configs. Downstream tooling parses these shapes.

use serde_json::Value;

use srt4div::fixedpoint::FixedPoint;
use srt4div::fuzzy::{FuzzyError, FuzzyRuleSet};
use srt4div::harness::{
    format_regression_file, parse_regression_text, run_regressions, HarnessError, RegressionVector,
};
use srt4div::ieee754::{fdiv_traced, Flags};
use srt4div::qds::{build_pd_map, sweep_containment, DigitSelector, Policy};
use srt4div::srt::{run_divide, trace_to_delimited, trace_to_json, SrtConfig};

fn sample_trace() -> Vec<srt4div::srt::CycleTrace> {
    let x = FixedPoint::new(3, 2).unwrap(); // 0.75
    let d = FixedPoint::new(1, 1).unwrap(); // 0.5
    let cfg = SrtConfig::new(6, Policy::Exact).unwrap();
    run_divide(&x, &d, &cfg).unwrap().cycles
}

#[test]
fn trace_json_is_an_array_of_named_cycles() {
    let json = trace_to_json(&sample_trace());
    let v: Value = serde_json::from_str(&json).unwrap();
    let rows = v.as_array().expect("top level is a bare array");
    assert_eq!(rows.len(), 6);
    for (i, row) in rows.iter().enumerate() {
        for key in [
            "j", "p_in", "rp", "q_est", "q_final", "p_keep", "p_inc", "p_out", "A_bits", "B_bits",
        ] {
            assert!(row.get(key).is_some(), "row {i} missing {key}");
        }
    }
    assert_eq!(rows[0]["j"], 1);
    // fixed-point fields are exact decimal strings
    assert_eq!(rows[0]["p_in"], "0.1875");
    assert_eq!(rows[0]["rp"], "0.75");
    assert!(rows[0]["A_bits"].as_str().unwrap().len() == 2);
}

#[test]
fn trace_delimited_has_stable_header_and_width() {
    let text = trace_to_delimited(&sample_trace());
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "j,p_in,rp,q_est,q_final,p_keep,p_inc,p_out,A_bits,B_bits"
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 6);
    for row in rows {
        assert_eq!(row.split(',').count(), 10, "row: {row}");
    }
}

#[test]
fn selection_map_csv_shape() {
    let sel = DigitSelector::new(Policy::Exact);
    let map = build_pd_map(8, 10, &sel).unwrap();
    let csv = map.to_csv();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "d,rp,q_est,q_final,in_overlap");
    let body: Vec<&str> = lines.collect();
    assert_eq!(body.len(), map.cells.len());
    // every row: exact decimals, digits in range, flag is 0/1
    for row in body.iter().take(500) {
        let cols: Vec<&str> = row.split(',').collect();
        assert_eq!(cols.len(), 5);
        let q_est: i8 = cols[2].parse().unwrap();
        let q_final: i8 = cols[3].parse().unwrap();
        assert!((-2..=1).contains(&q_est));
        assert!((-2..=2).contains(&q_final));
        assert!(cols[4] == "0" || cols[4] == "1");
    }
}

#[test]
fn sweep_report_serializes_with_counts_and_policies() {
    let sel = DigitSelector::new(Policy::Fuzzy);
    let report = sweep_containment(8, &sel).unwrap();
    let v: Value = serde_json::from_str(&serde_json::to_string(&report).unwrap()).unwrap();
    assert!(v["cells_checked"].as_u64().unwrap() > 0);
    assert_eq!(v["violations"].as_array().unwrap().len(), 0);
    assert_eq!(v["policies_compared"][0], "fuzzy");
}

#[test]
fn campaign_report_omits_wall_time_and_names_fields() {
    let report = srt4div::harness::fuzz_divide(64, 5, Policy::Exact).unwrap();
    let v: Value = serde_json::from_str(&report.to_json()).unwrap();
    let obj = v.as_object().unwrap();
    for key in [
        "cases_run",
        "mismatches",
        "seed",
        "policy",
        "divergent_cases",
    ] {
        assert!(obj.contains_key(key), "missing {key}");
    }
    assert!(!obj.contains_key("wall_time"));
    assert_eq!(v["cases_run"], 64);
    assert_eq!(v["policy"], "exact");
}

#[test]
fn regression_file_roundtrip_and_error_positions() {
    let vectors = vec![
        RegressionVector::from_oracle("unity", 0x3FF0000000000000, 0x3FF0000000000000),
        RegressionVector::from_oracle("dbz", 0x3FF0000000000000, 0),
    ];
    let text = format_regression_file(&vectors);
    let parsed = parse_regression_text("roundtrip", &text).unwrap();
    assert_eq!(parsed, vectors);

    // flags column renders '-' for none and names otherwise
    assert!(text.lines().next().unwrap().ends_with(" -"));
    assert!(text.lines().nth(1).unwrap().ends_with(" divide_by_zero"));

    let bad = "# comment\n\nok 3FF0000000000000 3FF0000000000000 3FF0000000000000 -\nbad 3FF0 3FF0 3FF0 bogus_flag\n";
    match parse_regression_text("f.txt", bad) {
        Err(HarnessError::Parse { path, line, msg }) => {
            assert_eq!(path, "f.txt");
            assert_eq!(line, 4, "errors carry source line numbers");
            assert!(msg.contains("bogus_flag"), "{msg}");
        }
        other => panic!("expected Parse error, got {other:?}"),
    }
}

#[test]
fn regression_campaign_runs_from_disk() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("vectors.txt");
    let vectors = vec![
        RegressionVector::from_oracle("third", 0x3FF0000000000000, 0x4008000000000000),
        RegressionVector::from_oracle("inf-over-inf", 0x7FF0000000000000, 0x7FF0000000000000),
    ];
    std::fs::write(&path, format_regression_file(&vectors)).unwrap();
    let report = run_regressions(&path).unwrap();
    assert_eq!(report.cases_run, 6);
    assert!(report.passed());

    let missing = run_regressions(&dir.path().join("nope.txt"));
    assert!(matches!(missing, Err(HarnessError::Io(_))));
}

#[test]
fn fuzzy_config_text_overrides_and_rejects() {
    let cfg = "\
# custom rule shapes
input_keep: 0,1; 0.6,0
input_increment: 0.4,0; 1,1
grid_n: 128
";
    let rules = FuzzyRuleSet::from_config_str(cfg).unwrap();
    assert_eq!(rules.grid_n, 128);
    assert_eq!(rules.input_keep.points(), &[(0.0, 1.0), (0.6, 0.0)]);
    // outputs were not mentioned: defaults survive
    assert_eq!(
        rules.output_keep.points(),
        FuzzyRuleSet::default().output_keep.points()
    );

    match FuzzyRuleSet::from_config_str("input_keep: 0,1; 0.5,2\n") {
        Err(FuzzyError::Config { line, .. }) => assert_eq!(line, 1),
        other => panic!("expected config error, got {other:?}"),
    }
    match FuzzyRuleSet::from_config_str("grid_n: 64\nwhatever: 1,2\n") {
        Err(FuzzyError::Config { line, .. }) => assert_eq!(line, 2),
        other => panic!("expected config error, got {other:?}"),
    }
}

#[test]
fn traced_divide_exposes_the_full_cycle_history() {
    let sel = DigitSelector::new(Policy::Exact);
    let (bits, flags, cycles) = fdiv_traced(1.0f64.to_bits(), 3.0f64.to_bits(), &sel);
    assert_eq!(bits, 0x3FD5555555555555);
    assert_eq!(flags.to_string(), "inexact");
    assert_eq!(cycles.len(), 29);
    let json = trace_to_json(&cycles);
    let v: Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 29);

    // special operands never enter the recurrence
    let (_, _, none) = fdiv_traced(1.0f64.to_bits(), 0, &sel);
    assert!(none.is_empty());
}

#[test]
fn flags_render_and_parse_in_canonical_order() {
    let mut f = Flags::none();
    assert_eq!(f.to_string(), "-");
    f.underflow = true;
    f.inexact = true;
    assert_eq!(f.to_string(), "underflow,inexact");
    let parsed: Flags = "underflow,inexact".parse().unwrap();
    assert_eq!(parsed, f);
    assert_eq!("-".parse::<Flags>().unwrap(), Flags::none());
    assert!("nonsense".parse::<Flags>().is_err());
}
