//! End-to-end runs of the `magray` binary: exit codes, artifact layout, and
//! the simplicity gate.

use std::fs;
use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_magray"))
}

fn workdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("magray-cli-{tag}-{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_config(dir: &PathBuf, lambda: f64, stations: usize, angles: usize) -> PathBuf {
    let path = dir.join("config.json");
    fs::write(
        &path,
        format!(
            r#"{{
  "system": {{
    "metric": {{"family": "euclidean"}},
    "alpha": {{"family": "solenoid", "lambda": {lambda}}}
  }},
  "fan": {{"stations": {stations}, "angles": {angles}}},
  "mesh": {{"rings": 10}},
  "seed": 0
}}"#
        ),
    )
    .unwrap();
    path
}

#[test]
fn verify_subset_passes_on_simple_system() {
    let dir = workdir("verify");
    let cfg = write_config(&dir, 0.3, 24, 16);
    let out = bin()
        .args(["verify", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .args(["--checks", "reversibility,curvature"])
        .output()
        .unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "stdout: {stdout}");
    assert!(stdout.contains("simplicity     PASS"));
    assert!(stdout.contains("curvature      PASS"));
    let report = fs::read_to_string(dir.join("out/verify_report.json")).unwrap();
    let records: serde_json::Value = serde_json::from_str(&report).unwrap();
    assert!(records.as_array().unwrap().len() >= 3);
}

#[test]
fn verify_gates_on_non_simple_system() {
    let dir = workdir("gate");
    let cfg = write_config(&dir, 1.5, 16, 8);
    let out = bin()
        .args(["verify", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("simplicity     FAIL"), "stdout: {stdout}");
    assert!(stdout.contains("skipped"), "stdout: {stdout}");
}

#[test]
fn invalid_config_is_usage_error() {
    let dir = workdir("badcfg");
    let cfg = dir.join("config.json");
    fs::write(&cfg, "{ not json").unwrap();
    let out = bin()
        .args(["verify", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn shoot_writes_trajectories() {
    let dir = workdir("shoot");
    let cfg = write_config(&dir, 0.4, 8, 4);
    let out = bin()
        .args(["shoot", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .args(["--rays", "3", "--samples", "16"])
        .output()
        .unwrap();
    assert!(out.status.success());
    for k in 0..3 {
        let csv = fs::read_to_string(dir.join(format!("out/trajectory_{k:03}.csv"))).unwrap();
        assert!(csv.starts_with("t,x,y,xi1,xi2"));
        assert_eq!(csv.lines().count(), 17);
    }
}

#[test]
fn transform_then_invert_roundtrip() {
    let dir = workdir("roundtrip");
    let cfg = write_config(&dir, 0.3, 32, 24);
    let out = bin()
        .args(["transform", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .args(["--input", "potential-bump"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let data = dir.join("out/boundary_data.csv");
    assert!(data.exists());

    let out = bin()
        .args(["adjoint", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .arg("--data")
        .arg(&data)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let adjoint: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("out/adjoint.json")).unwrap()).unwrap();
    assert!(adjoint["vertices"].as_array().unwrap().len() > 100);

    // potential data reconstructs to (near) zero
    let out = bin()
        .args(["invert", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .arg("--data")
        .arg(&data)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("out/inversion.json")).unwrap())
            .unwrap();
    let h = report["reconstruction"]["h"].as_array().unwrap();
    let max_h = h
        .iter()
        .flat_map(|row| row.as_array().unwrap())
        .map(|v| v.as_f64().unwrap().abs())
        .fold(0.0f64, f64::max);
    assert!(max_h < 5e-3, "potential data reconstructed mass {max_h}");
}

#[test]
fn demo_exp_c2_prints_gap() {
    let dir = workdir("demo");
    let cfg = write_config(&dir, 0.5, 8, 4);
    let out = bin()
        .args(["demo", "exp-c2", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("2|Y(v)|"), "stdout: {stdout}");
}
