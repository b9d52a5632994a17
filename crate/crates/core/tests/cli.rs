use std::path::Path;
use std::process::{Command, Output};

use parabolica::cli::{emit_report, ExitStatus};
use parabolica::verify::{Case, EstimateReport};

fn run(dir: &Path, command: &str, scenario: &str, extra: &[&str]) -> Output {
    let file = dir.join(format!("{command}.toml"));
    std::fs::write(&file, scenario).unwrap();
    Command::new(env!("CARGO_BIN_EXE_parabolica"))
        .arg(command)
        .arg("--scenario")
        .arg(&file)
        .arg("--out")
        .arg(dir.join("out"))
        .args(extra)
        .output()
        .unwrap()
}

#[test]
fn validate_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let ok = run(dir.path(), "validate", "problem = \"ou1d\"\n", &[]);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    let md = std::fs::read_to_string(dir.path().join("out/hypotheses.md")).unwrap();
    assert!(md.contains("| lyapunov_drift | PASS |"));

    let heat = run(dir.path(), "validate", "problem = \"heat1d\"\n", &[]);
    assert_eq!(heat.status.code(), Some(2));
}

#[test]
fn malformed_expression_is_reported_with_position() {
    let dir = tempfile::tempdir().unwrap();
    let text = "[problem]\ndim = 1\nq = [\"1 +\"]\nb = [\"-x1\"]\neta0 = 1.0\n[problem.lyapunov]\nphi = \"1 + x1^2\"\na = 4.0\nc = 2.0\n";
    let out = run(dir.path(), "validate", text, &[]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("problem.q[0]") && err.contains("column 4"), "{err}");
}

#[test]
fn command_mismatch_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), "solve", "problem = \"ou1d\"\n[run]\ncommand = \"verify\"\n", &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("run.command"));
}

#[test]
fn blowup_is_a_result() {
    let dir = tempfile::tempdir().unwrap();
    let text = "[problem]\nbase = \"ou1d\"\npsi = \"u^2\"\n[run]\nwindow = [0.0, 2.0]\ninitial = [\"1\"]\n";
    let out = run(dir.path(), "solve", text, &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let md = std::fs::read_to_string(dir.path().join("out/solution.md")).unwrap();
    let line = md.lines().find(|l| l.starts_with("Blow-up bracket")).unwrap();
    let nums: Vec<f64> = line
        .trim_start_matches("Blow-up bracket: [")
        .trim_end_matches(']')
        .split(", ")
        .map(|v| v.parse().unwrap())
        .collect();
    assert!(nums[0] <= 1.0 && 1.0 <= nums[1], "{line}");
    let csv = std::fs::read_to_string(dir.path().join("out/solution.csv")).unwrap();
    assert!(csv.starts_with("t,sup_norm"));
}

#[test]
fn not_applicable_only_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let text = "problem = \"polycoef\"\n[run]\nsuites = [\"lp-stability\"]\n";
    let out = run(dir.path(), "verify", text, &[]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("out/reports.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.ends_with("NOT-APPLICABLE")), "{csv}");
}

#[test]
fn thread_settings() {
    let dir = tempfile::tempdir().unwrap();
    let text = "problem = \"ou1d\"\n[run]\ncommand = \"measures\"\n";
    let out = run(dir.path(), "measures", text, &["--threads", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let bad = Command::new(env!("CARGO_BIN_EXE_parabolica"))
        .args(["measures", "--scenario"])
        .arg(dir.path().join("measures.toml"))
        .arg("--out")
        .arg(dir.path().join("out"))
        .env("PARABOLICA_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(1));
    let csv = std::fs::read_to_string(dir.path().join("out/measures.csv")).unwrap();
    let first: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    // Stationary law of the standard OU process.
    assert!(first[1].parse::<f64>().unwrap().abs() < 1e-12);
    assert!((first[2].parse::<f64>().unwrap() - 1.0).abs() < 1e-9);
}

#[test]
fn emit_report_contract() {
    let dir = tempfile::tempdir().unwrap();
    let formats = vec!["csv".to_string(), "markdown".to_string()];
    assert!(emit_report(&[], &formats, dir.path()).is_err());

    let mut pass = EstimateReport::new("b_suite", "x ≤ 1", 0.0, "test");
    pass.push(Case::new("only", "", 0.5, 1.0));
    let pass = pass.finish();
    let files = emit_report(std::slice::from_ref(&pass), &formats, dir.path()).unwrap();
    assert_eq!(files.len(), 2);
    let csv = std::fs::read_to_string(dir.path().join("reports.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    let md = std::fs::read_to_string(dir.path().join("reports.md")).unwrap();
    assert_eq!(md.lines().filter(|l| l.starts_with("| only")).count(), 1);

    let mut fail = EstimateReport::new("a_suite", "x ≤ 1", 0.0, "test");
    fail.push(Case::new("bad", "", 2.0, 1.0));
    let reports = [pass, fail.finish()];
    emit_report(&reports, &formats, dir.path()).unwrap();
    assert_eq!(ExitStatus::from_reports(&reports), ExitStatus::Failure);
    let csv = std::fs::read_to_string(dir.path().join("reports.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().starts_with("a_suite,bad,"));
}
