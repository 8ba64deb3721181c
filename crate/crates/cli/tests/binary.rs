use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const SMALL: &str = r#"{
    "inertia": [800, 1200, 1000],
    "initial_attitude": { "axis": [1, 0, 0], "angle": 0 },
    "final_attitude": { "axis": [0, 0, 1], "angle": 10, "unit": "deg" },
    "pi_initial": [1, 0, 0],
    "pi_final": [0, 0, 0],
    "h": 0.1,
    "steps": 80,
    "c": [20, 20, 20],
    "b": [70, 70, 70]
}"#;

fn attitude(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_attitude"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("maneuver.json");
    std::fs::write(&path, text).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn solve_simulate_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    let res = attitude(&["solve", s(&cfg), "--out-dir", s(&out)]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&res.stdout).unwrap();
    assert_eq!(summary["status"], "converged");
    for f in ["trajectory.csv", "report.json", "trajectory.svg"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let csv = out.join("trajectory.csv");
    let res = attitude(&["simulate", s(&cfg), "--controls", s(&csv), "--out-dir", s(&out)]);
    assert_eq!(res.status.code(), Some(0));
    let sim: serde_json::Value = serde_json::from_slice(&res.stdout).unwrap();
    assert!(sim["orientation_error_to_target"].as_f64().unwrap() < 1e-8);
    let res = attitude(&["plot", s(&out.join("simulation.csv"))]);
    assert_eq!(res.status.code(), Some(0));
    assert!(out.join("simulation.svg").exists());
}

#[test]
fn check_reports_inertia_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let res = attitude(&["check", s(&cfg)]);
    assert_eq!(res.status.code(), Some(0));
    let rep: serde_json::Value = serde_json::from_slice(&res.stdout).unwrap();
    assert_eq!(rep["jd"], serde_json::json!([700.0, 300.0, 500.0]));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(
        dir.path(),
        &SMALL.replace("[1, 0, 0],\n    \"pi_final\"", "[90, 0, 0],\n    \"pi_final\""),
    );
    assert_eq!(attitude(&["solve", s(&bad)]).status.code(), Some(2));
    let missing = dir.path().join("nope.json");
    assert_eq!(attitude(&["solve", s(&missing)]).status.code(), Some(4));
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    let res = attitude(&["--max-iter", "1", "solve", s(&cfg), "--out-dir", s(&out)]);
    assert_eq!(res.status.code(), Some(3));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["error_class"], "MaxIterationsExceeded");
    assert_eq!(attitude(&["--damping", "1.5", "solve", s(&cfg)]).status.code(), Some(2));
    let short = dir.path().join("u.csv");
    std::fs::write(&short, "0,0,0\n").unwrap();
    assert_eq!(
        attitude(&["simulate", s(&cfg), "--controls", s(&short)]).status.code(),
        Some(2)
    );
}
