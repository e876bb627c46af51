//! Black-box tests of the `liesym` binary: exit codes, report shape,
//! determinism, and a few end-to-end verdicts over the bundled problems.

use std::path::PathBuf;
use std::process::{Command, Output};

fn prob(name: &str) -> String {
    let mut p = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    p.push("problems");
    p.push(name);
    p.to_string_lossy().into_owned()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_liesym"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf-8 stdout")
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).expect("utf-8 stderr")
}

#[test]
fn help_exits_zero() {
    let out = run(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("symmetries"));
}

#[test]
fn table_reproduces_euclidean_relations() {
    let out = run(&["table", &prob("e2.prob")]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("[0, 0, v2]"), "row of v1 brackets: {text}");
    assert!(text.contains("[0, 0, -v1]"), "row of v2 brackets: {text}");
}

#[test]
fn json_output_is_byte_identical_across_runs() {
    let args = ["symmetries", &prob("heat.prob"), "--json"];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout, "repeated runs must agree byte for byte");

    let v: serde_json::Value = serde_json::from_slice(&a.stdout).expect("valid json");
    let obj = v.as_object().expect("top-level object");
    let keys: Vec<&String> = obj.keys().collect();
    assert_eq!(keys, ["command", "seed", "inputs", "options", "results", "warnings"]);
    assert_eq!(v["command"], "symmetries");
    assert_eq!(v["results"]["dimension"], 9);
    assert_eq!(v["results"]["superposition_count"], 3);
}

#[test]
fn seed_flag_is_echoed_in_reports() {
    let out = run(&["invariants", &prob("e2.prob"), "--order", "1", "--json", "--seed", "7"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).expect("valid json");
    assert_eq!(v["seed"], 7);
}

#[test]
fn parse_errors_exit_two_with_line_number() {
    let dir = std::env::temp_dir().join("liesym-cli-test");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("bad.prob");
    std::fs::write(&path, "vars x\nunknowns y\nvf v = x^ @x\n").unwrap();
    let out = run(&["table", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 3"), "stderr: {}", stderr(&out));
}

#[test]
fn unknown_field_name_exits_two_and_lists_choices() {
    let out = run(&["check", &prob("heat.prob"), "--field", "nope"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("declared: v1"), "stderr: {}", stderr(&out));
}

#[test]
fn negative_verdict_still_exits_zero() {
    let out = run(&["linearize", "--f", "x^(-5)*y^2"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("linearizable: false"), "{text}");
    assert!(text.contains("i2: 12/x^5"), "{text}");
}

#[test]
fn linearizable_chain_equation_passes() {
    let out = run(&["linearize", "--f", "-3*y*p - y^3", "--json"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).expect("valid json");
    assert_eq!(v["results"]["linearizable"], true);
    assert_eq!(v["results"]["i1"], "0");
    assert_eq!(v["results"]["i2"], "0");
}

#[test]
fn non_nilpotent_exact_adjoint_exits_one() {
    let out = run(&["adjoint", &prob("o3.prob"), "--v", "v2", "--w", "v1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("not nilpotent"), "stderr: {}", stderr(&out));
}

#[test]
fn numeric_adjoint_matches_rotation() {
    let out = run(&[
        "adjoint", &prob("o3.prob"), "--v", "v2", "--w", "v1", "--numeric", "--eps", "0.5",
        "--json",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).expect("valid json");
    let c = v["results"]["coefficients"]["v1"].as_f64().unwrap();
    let s = v["results"]["coefficients"]["v3"].as_f64().unwrap();
    assert!((c - 0.5f64.cos()).abs() < 1e-9);
    assert!((s - 0.5f64.sin()).abs() < 1e-9);
}

#[test]
fn time_symbol_collision_exits_two() {
    let out = run(&[
        "flow-series", &prob("e2.prob"), "--field", "v1", "--function", "y",
        "--time-symbol", "x",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("collides"), "stderr: {}", stderr(&out));
}

#[test]
fn flow_series_truncates_rotation() {
    let out = run(&["flow-series", &prob("e2.prob"), "--field", "v3", "--function", "x"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(
        text.contains("series: x - y*eps - (1/2)*x*eps^2 + (1/24)*x*eps^4 + (1/6)*y*eps^3"),
        "{text}"
    );
    assert!(text.contains("truncated at order 4"), "{text}");
}

#[test]
fn rectify_check_confirms_canonical_coordinates() {
    let out = run(&[
        "rectify-check", &prob("riccati-chain.prob"), "--field", "v1",
        "--r", "x - 1/y", "--s", "x/y - x^2/2",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("rectifies: true"), "{}", stdout(&out));
}

#[test]
fn check_reports_conformal_factor() {
    let out = run(&["check", &prob("laplace.prob"), "--json"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).expect("valid json");
    assert_eq!(v["results"]["checks"][0]["verdict"], "on-solutions");
    assert_eq!(v["results"]["checks"][0]["factors"][0], "-4*x");
}

#[test]
fn prolong_with_verification_succeeds() {
    let out = run(&["prolong", &prob("scaling.prob"), "--order", "2", "--verify"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("u_x: u - x*u_x"), "{text}");
    assert!(text.contains("u_xx: -3*x*u_xx"), "{text}");
}

#[test]
fn classification_and_sampling_warning() {
    let out = run(&["classify-2d", &prob("emden-fowler.prob")]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("class: A2,3"), "{text}");
    assert!(text.contains("warning: generic rank sampled"), "{text}");
}
