use std::process::Command;

use nfdbp::experiment::{read_csv, read_json, ExperimentConfig, CSV_COLUMNS};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nfdbp"))
}

fn small_config(dir: &std::path::Path) -> std::path::PathBuf {
    let mut cfg = ExperimentConfig::desk_normal_nyquist();
    cfg.trials = 2;
    cfg.power_sweep_dbm = vec![-4.0, 4.0];
    cfg.forward_steps_per_span = 10;
    let path = dir.join("small.toml");
    std::fs::write(&path, cfg.to_toml()).unwrap();
    path
}

#[test]
fn selftest_passes() {
    let out = bin().arg("selftest").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().count() >= 5);
    assert!(text.lines().all(|l| l.starts_with("PASS")), "{text}");
}

#[test]
fn run_writes_csv_with_schema_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let csv = dir.path().join("out.csv");
    let status = bin()
        .args(["run", cfg.to_str().unwrap(), "--seed", "9", "--out"])
        .arg(&csv)
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().next().unwrap(), CSV_COLUMNS.join(","));
    let rows = read_csv(&csv).unwrap();
    assert_eq!(rows.len(), 2 * 3);
    assert!(rows.iter().all(|r| r.trials == 2));
}

#[test]
fn seed_flag_and_json_format() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let json = dir.path().join("out.json");
    let status = bin()
        .args([
            "run",
            cfg.to_str().unwrap(),
            "--seed",
            "77",
            "--format",
            "json",
            "--out",
        ])
        .arg(&json)
        .status()
        .unwrap();
    assert!(status.success());
    let report = read_json(&json).unwrap();
    assert_eq!(report.seed, 77);
    assert_eq!(report.config.seed, 77);
}

#[test]
fn same_seed_gives_identical_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let run = || {
        bin()
            .args(["run", cfg.to_str().unwrap(), "--seed", "3"])
            .output()
            .unwrap()
            .stdout
    };
    assert_eq!(run(), run());
}

#[test]
fn missing_config_is_an_error() {
    let out = bin()
        .args(["run", "/nonexistent/cfg.toml"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}

#[test]
fn unknown_flag_is_rejected() {
    let out = bin().args(["run", "x", "--bogus"]).output().unwrap();
    assert!(!out.status.success());
}

#[test]
fn shipped_configs_match_presets() {
    for name in ["desk-normal-nyquist", "desk-anomalous-ofdm", "full-scale"] {
        let path = format!("{}/configs/{name}.toml", env!("CARGO_MANIFEST_DIR"));
        let text = std::fs::read_to_string(&path).unwrap();
        let cfg = ExperimentConfig::from_toml(&text).unwrap();
        assert_eq!(cfg, ExperimentConfig::preset(name).unwrap(), "{path}");
    }
}
