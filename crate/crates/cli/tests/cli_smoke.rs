//! End-to-end smoke tests of the command-line interface.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_resdyn"))
}

fn tmp(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join("resdyn_cli_smoke").join(name);
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn tiny_config(dir: &Path) -> PathBuf {
    let path = dir.join("config.json");
    std::fs::write(
        &path,
        r#"{"N": 200, "M": 6, "alpha": 0.3, "dt": 0.01, "rho": 0.99, "beta": 0.002,
            "delta_tau": 0.11, "a_density": 0.05, "w_in_scale": 0.04, "seed": 7}"#,
    )
    .unwrap();
    path
}

#[test]
fn generate_train_predict_pipeline() {
    let dir = tmp("pipeline");
    let status = bin()
        .args(["--out", dir.to_str().unwrap(), "generate", "--system", "lorenz28", "--t", "300"])
        .status()
        .unwrap();
    assert!(status.success());
    let traj = dir.join("trajectory.csv");
    assert!(traj.exists());

    let cfg = tiny_config(&dir);
    let status = bin()
        .args([
            "--out",
            dir.to_str().unwrap(),
            "--config",
            cfg.to_str().unwrap(),
            "train",
            "--data",
            traj.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());
    assert!(dir.join("model/meta.json").exists());
    assert!(dir.join("model/A.bin").exists());

    let status = bin()
        .args([
            "--out",
            dir.to_str().unwrap(),
            "predict",
            "--model",
            dir.join("model").to_str().unwrap(),
            "--warmup",
            traj.to_str().unwrap(),
            "--steps",
            "200",
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let pred = resdyn_core::TimeSeries::read_csv(dir.join("prediction.csv")).unwrap();
    assert_eq!(pred.len(), 200);
    assert_eq!(pred.dim(), 3);
}

#[test]
fn generate_is_bit_reproducible_and_rejects_zero_length() {
    let dir = tmp("determinism");
    for name in ["a.csv", "b.csv"] {
        let status = bin()
            .args([
                "--out",
                dir.to_str().unwrap(),
                "--seed",
                "42",
                "generate",
                "--system",
                "rossler",
                "--t",
                "50",
                "--name",
                name,
            ])
            .status()
            .unwrap();
        assert!(status.success());
    }
    let a = std::fs::read(dir.join("a.csv")).unwrap();
    let b = std::fs::read(dir.join("b.csv")).unwrap();
    assert_eq!(a, b, "same seed must give identical bytes");

    let status = bin()
        .args(["--out", dir.to_str().unwrap(), "generate", "--system", "lorenz28", "--t", "0"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2), "zero length is a usage error");
}

#[test]
fn analyze_scalar_diagnostics() {
    let dir = tmp("analyze");
    let status = bin()
        .args(["--out", dir.to_str().unwrap(), "generate", "--system", "lorenz28", "--t", "200"])
        .status()
        .unwrap();
    assert!(status.success());
    let traj = dir.join("trajectory.csv");
    let status = bin()
        .args([
            "--out",
            dir.to_str().unwrap(),
            "analyze",
            "--data",
            traj.to_str().unwrap(),
            "--poincare",
            "--density",
            "--laminar",
            "--threshold",
            "1.8",
        ])
        .status()
        .unwrap();
    assert!(status.success());
    assert!(dir.join("poincare.csv").exists());
    assert!(dir.join("density.csv").exists());
    assert!(dir.join("laminar.json").exists());
    let density: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("density.json")).unwrap()).unwrap();
    let std = density["std"].as_f64().unwrap();
    assert!((std - 7.9).abs() < 1.0, "x std {std} should be near 7.9");
}

#[test]
fn analyze_without_selector_is_a_usage_error() {
    let dir = tmp("noselector");
    let status = bin()
        .args(["--out", dir.to_str().unwrap(), "generate", "--system", "lorenz28", "--t", "10"])
        .status()
        .unwrap();
    assert!(status.success());
    let status = bin()
        .args([
            "--out",
            dir.to_str().unwrap(),
            "analyze",
            "--data",
            dir.join("trajectory.csv").to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn reproduce_rejects_unknown_identifier_with_usage_listing() {
    let out = bin().args(["reproduce", "tableX"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("table3"), "usage error should list valid identifiers: {err}");
}

#[test]
fn missing_training_file_is_reported() {
    let dir = tmp("missing");
    let cfg = tiny_config(&dir);
    let status = bin()
        .args([
            "--out",
            dir.to_str().unwrap(),
            "--config",
            cfg.to_str().unwrap(),
            "train",
            "--data",
            dir.join("nope.csv").to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}
