use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_waveguide-gap"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn quick_with(extra: &str) -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(configs().join("quick.toml")).unwrap() + extra;
    let path = dir.path().join("config.toml");
    std::fs::write(&path, text).unwrap();
    (dir, path)
}

#[test]
fn malformed_config_exits_with_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "version = 1\n[cross_section\nkind = 3\n").unwrap();
    let out = run(&["cross-section", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 2"), "{err}");
}

#[test]
fn missing_config_is_a_config_error() {
    let out = run(&["polarization"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["polarization", "--config", "/nonexistent/config.toml"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn cross_section_report_for_unit_square() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "cross-section",
        "--config",
        configs().join("quick.toml").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--threads",
        "1",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["command"], "cross-section");
    assert_eq!(report["seed"], 7);
    assert_eq!(report["config_hash"].as_str().unwrap().len(), 64);
    assert!(report["versions"]["floquet"].is_string());
    assert_eq!(report["result"]["gap_condition_ok"], true);
    let csv = std::fs::read_to_string(dir.path().join("cross_section.csv")).unwrap();
    assert!(csv.starts_with("resolution,M_1,M_2,M_3,M_4,dnV1\n"));
}

#[test]
fn disk_cross_section_row() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "cross-section",
        "--config",
        configs().join("disk.toml").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    let m1 = report["result"]["m1"].as_f64().unwrap();
    assert!((m1 - 5.7832).abs() < 1e-3, "{m1}");
    assert_eq!(report["result"]["gap_condition_ok"], false);
}

#[test]
fn gap_scan_on_disk_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "gap-scan",
        "--config",
        configs().join("disk.toml").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("no gap"));
}

#[test]
fn empty_check_selection_is_a_no_op() {
    let (dir, path) = quick_with("\n[verify]\nchecks = []\n");
    let out = run(&[
        "verify",
        "--config",
        path.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no checks selected"));
}

#[test]
fn tight_discretization_budget_fails_bracketing() {
    let (dir, path) = quick_with("\n[verify]\nchecks = [\"bracketing\"]\ndiscretization_budget = 1e-6\n");
    let out = run(&[
        "verify",
        "--config",
        path.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("FAIL Bracketing"), "{stdout}");
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["result"]["all_passed"], false);
}

#[test]
fn cheap_checks_pass() {
    let (dir, path) = quick_with("\n[verify]\nchecks = [\"coupling_identities\", \"cross_section\", \"symmetry\"]\n");
    let out = run(&[
        "verify",
        "--config",
        path.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{stdout}");
    assert_eq!(stdout.matches("PASS").count(), 3);
}
