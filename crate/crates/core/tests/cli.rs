use std::path::Path;
use std::process::{Command, Output};

fn caplab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_caplab")).args(args).output().unwrap()
}

fn write_config(dir: &Path, name: &str, json: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, json).unwrap();
    path.to_str().unwrap().to_owned()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn capacity_reports_newtonian_value() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "cap.json",
        r#"{"task": "capacity", "m": 3, "p": 2, "rho": 1, "R": 2, "warping": {"type": "space_form", "b": 0}}"#,
    );
    let out = caplab(&["capacity", &config]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("drifted_capacity = 25.132741"), "{text}");
    assert!(text.contains("model_pcapacity = 25.132741"), "{text}");
}

#[test]
fn analyze_writes_json_report() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "an.json",
        r#"{"task": "analyze", "m": 3, "p": 2, "rho": 1, "R": "inf", "warping": {"type": "space_form", "b": -1}}"#,
    );
    let report = dir.path().join("report.json");
    let out = caplab(&["analyze", &config, "--out", report.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("verdict: PHyperbolic"));
    let json: serde_json::Value = serde_json::from_slice(&std::fs::read(&report).unwrap()).unwrap();
    assert_eq!(json["verdict"]["verdict"], "PHyperbolic", "{json}");
}

#[test]
fn table_prints_csv_on_requested_grid() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "table.json",
        r#"{"task": "table", "m": 3, "p": 2, "rho": 1, "R": 2, "warping": {"type": "space_form", "b": 0}}"#,
    );
    let out = caplab(&["table", &config, "--grid", "5"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "r,w,eta,M,Lambda,psi");
    assert_eq!(lines.len(), 6);
    // psi = 2 (1 - 1/r) on (1, 2)
    let psi: f64 = lines[2].rsplit(',').next().unwrap().parse().unwrap();
    assert!((psi - 0.4).abs() < 1e-9);
}

#[test]
fn config_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "bad.json", r#"{"m": 3, "p": 1, "rho": 1}"#);
    let out = caplab(&["analyze", &config]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/p"));

    let out = caplab(&["analyze", dir.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn analyze_requires_config() {
    let out = caplab(&["analyze"]);
    assert_ne!(out.status.code(), Some(0));
}

#[test]
fn verify_without_config_passes() {
    let out = caplab(&["verify"]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    assert!(stdout(&out).contains("9 of 9 criteria passed"));
}
