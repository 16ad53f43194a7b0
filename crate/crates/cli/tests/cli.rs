use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn scenario(name: &str) -> String {
    let mut p = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    p.push("scenarios");
    p.push(name);
    p.to_string_lossy().into_owned()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_formalcalc")).args(args).output().expect("binary runs")
}

fn run_json(args: &[&str]) -> (i32, Value) {
    let mut a = args.to_vec();
    a.push("--json");
    let out = run(&a);
    let v = serde_json::from_slice(&out.stdout).unwrap_or(Value::Null);
    (out.status.code().unwrap_or(-1), v)
}

#[test]
fn pair_examples() {
    for (file, want) in [("pair_sum.json", "3"), ("pair_factorial.json", "10")] {
        let (code, v) = run_json(&["pair", "--scenario", &scenario(file), "--density", "eta", "--function", "u"]);
        assert_eq!(code, 0);
        assert_eq!(v["value"], want, "{file}");
    }
    let (code, v) = run_json(&["pair", "--scenario", &scenario("zero.json"), "--density", "zero", "--function", "u"]);
    assert_eq!(code, 0);
    assert_eq!(v["value"], "0");
}

#[test]
fn factorial_breakdown_lists_one_term() {
    let (_, v) = run_json(&["pair", "--scenario", &scenario("pair_factorial.json"), "--density", "eta", "--function", "u"]);
    assert_eq!(v["terms"], serde_json::json!([{"L": [2], "value": "10"}]));
}

#[test]
fn empty_check_list_passes_with_no_checks() {
    let (code, v) = run_json(&["check", "--scenario", &scenario("zero.json")]);
    assert_eq!(code, 0);
    assert_eq!(v["pass"], true);
    assert_eq!(v["checks"], 0);
}

#[test]
fn discrete_demo_passes_all_suites_exactly() {
    let (code, v) = run_json(&["check", "--scenario", &scenario("discrete_demo.json"), "--suite", "all", "--seed", "7"]);
    assert_eq!(code, 0, "{v}");
    let suites = v["suites"].as_array().unwrap();
    assert_eq!(suites.len(), 6);
    for s in suites {
        assert_eq!(s["pass"], true, "{s}");
        assert_eq!(s["max_residual"], 0.0, "{s}");
        assert!(s["checks"].as_u64().unwrap() > 0, "{s}");
    }
}

#[test]
fn corrupted_locals_fail_with_a_witness() {
    let (code, v) = run_json(&["check", "--scenario", &scenario("incompatible_locals.json")]);
    assert_eq!(code, 1);
    let failures = v["suites"][0]["failures"].as_array().unwrap();
    assert_eq!(failures.len(), 1);
    assert_eq!(failures[0]["witness"], "locals corrupted: parts 0,1");
    assert!(failures[0]["detail"].as_str().unwrap().contains("[1] vs [2]"));
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let args = ["check", "--scenario", &scenario("discrete_demo.json"), "--suite", "all", "--seed", "42", "--json"];
    let a = run(&args).stdout;
    let b = run(&args).stdout;
    assert!(!a.is_empty());
    assert_eq!(a, b);
}

#[test]
fn jets_of_x_squared_y() {
    let (code, v) = run_json(&["jet", "--scenario", &scenario("line_demo.json"), "--function", "x2y", "--point", "0", "--trunc", "3"]);
    assert_eq!(code, 0);
    assert_eq!(v["dimension"], "10");
    let nonzero: Vec<&Value> = v["table"].as_array().unwrap().iter().filter(|r| r["value"] != "0").collect();
    assert_eq!(nonzero.len(), 1);
    assert_eq!(nonzero[0]["I"], serde_json::json!([2]));
    assert_eq!(nonzero[0]["J"], serde_json::json!([1]));
    assert_eq!(nonzero[0]["value"], "2");
}

#[test]
fn zero_function_has_zero_jets() {
    let (code, v) = run_json(&["jet", "--scenario", &scenario("zero.json"), "--function", "zero", "--point", "p", "--trunc", "3"]);
    assert_eq!(code, 0);
    assert!(v["table"].as_array().unwrap().iter().all(|r| r["value"] == "0"));
    assert_eq!(v["in_m_a_r"], true);
}

#[test]
fn truncation_shortfall_is_an_input_error() {
    let out = run(&["jet", "--scenario", &scenario("line_demo.json"), "--function", "u", "--point", "0", "--trunc", "3"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("truncation"));
}

#[test]
fn input_errors_exit_with_two() {
    let cases: Vec<Vec<String>> = vec![
        vec!["pair".into(), "--scenario".into(), "/nonexistent.json".into(), "--density".into(), "a".into(), "--function".into(), "b".into()],
        vec!["pair".into(), "--scenario".into(), scenario("pair_sum.json"), "--density".into(), "nope".into(), "--function".into(), "u".into()],
        vec!["check".into(), "--scenario".into(), scenario("zero.json"), "--suite".into(), "bogus".into()],
        vec!["check".into()],
        vec!["frobnicate".into()],
    ];
    for args in cases {
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        assert_eq!(run(&args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn wrong_schema_is_rejected() {
    let dir = std::env::temp_dir().join("formalcalc-cli-schema-test.json");
    std::fs::write(&dir, r#"{"schema": 9, "backend": "discrete", "base": ["p"]}"#).unwrap();
    let out = run(&["check", "--scenario", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("schema"));
}

#[test]
fn line_partition_of_unity_sums_to_one() {
    let (code, v) = run_json(&["pou", "--scenario", &scenario("line_demo.json"), "--cover", "two"]);
    assert_eq!(code, 0);
    assert_eq!(v["functions"].as_array().unwrap().len(), 2);
    assert!(v["grid_residual"].as_f64().unwrap() <= 1e-12);
}

#[test]
fn discrete_partition_of_unity_is_first_match() {
    let (code, v) = run_json(&["pou", "--scenario", &scenario("discrete_demo.json"), "--cover", "halves"]);
    assert_eq!(code, 0);
    assert_eq!(v["defect_zero"], true);
    assert_eq!(v["functions"][0]["coeffs"]["0"], serde_json::json!({"p": "1", "q": "1", "r": "1"}));
    assert_eq!(v["functions"][1]["coeffs"]["0"], serde_json::json!({"s": "1"}));
}

#[test]
fn line_scenario_checks_within_tolerance() {
    let (code, v) = run_json(&["check", "--scenario", &scenario("line_demo.json")]);
    assert_eq!(code, 0, "{v}");
    assert!(v["suites"].as_array().unwrap().iter().all(|s| s["max_residual"].as_f64().unwrap() <= 1e-8));
}

#[test]
fn rho_and_apply_agree_on_the_line() {
    let (code, apply) = run_json(&["apply", "--scenario", &scenario("line_demo.json"), "--operator", "D", "--function", "u"]);
    assert_eq!(code, 0);
    let (_, pair) = run_json(&["pair", "--scenario", &scenario("line_demo.json"), "--density", "eta", "--function", "u"]);
    let parse = |v: &Value| v.as_str().unwrap().trim_start_matches('~').parse::<f64>().unwrap();
    assert!((parse(&apply["integral"]) - parse(&pair["value"])).abs() <= 1e-8);
}

#[test]
fn quadrature_budget_comes_from_the_environment() {
    let out = Command::new(env!("CARGO_BIN_EXE_formalcalc"))
        .args(["pair", "--scenario", &scenario("line_demo.json"), "--density", "eta", "--function", "u"])
        .env("FORMALCALC_QUAD_BUDGET", "20")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("quadrature"));
}
