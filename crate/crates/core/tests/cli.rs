use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

fn bundled(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn run(sub: &str, config: &Path, out: &Path, extra: &[&str]) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_sphere-align"))
        .arg(sub)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .arg("--quiet")
        .args(extra)
        .status()
        .unwrap()
        .code()
        .unwrap()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, text).unwrap();
    path
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn symmetric_pair_aligns_at_unit_strength() {
    let out = tempfile::tempdir().unwrap();
    assert_eq!(run("particles", &bundled("two_particle_symmetric.json"), out.path(), &[]), 0);
    let report = json(out.path().join("regime_report.json"));
    assert_eq!(report["regime"], "aligned");
    assert!((report["lambda"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert!(out.path().join("trajectory.csv").exists());
}

#[test]
fn light_antipodal_particle_stays_behind() {
    let out = tempfile::tempdir().unwrap();
    assert_eq!(run("particles", &bundled("antipodal_quarter.json"), out.path(), &[]), 0);
    let report = json(out.path().join("regime_report.json"));
    assert_eq!(report["regime"], "one_back");
    assert_eq!(report["i0"], 0);
    assert!((report["lambda"].as_f64().unwrap() - 0.5).abs() < 1e-9);
}

#[test]
fn every_bundled_config_passes() {
    let cases = [
        ("particles", "random_aligned.json"),
        ("particles", "one_back_perturbed.json"),
        ("vback", "vback_antipodal.json"),
        ("vback", "vback_aligned_pair.json"),
        ("kinetic", "kinetic_tilted.json"),
        ("slowdecay", "slowdecay.json"),
        ("measure", "measure_tilted.json"),
        ("measure", "measure_one_back.json"),
        ("measure", "measure_antipodal.json"),
    ];
    for (sub, name) in cases {
        let out = tempfile::tempdir().unwrap();
        assert_eq!(run(sub, &bundled(name), out.path(), &[]), 0, "{sub} {name}");
    }
}

#[test]
fn constant_field_sends_back_point_to_minus_j() {
    let out = tempfile::tempdir().unwrap();
    assert_eq!(run("vback", &bundled("vback_constant.json"), out.path(), &[]), 0);
    let report = json(out.path().join("vback_report.json"));
    let v: Vec<f64> = report["v_back"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert!((v[0] + 1.0).abs() < 1e-12 && v[1].abs() < 1e-9 && v[2].abs() < 1e-9, "{v:?}");
}

#[test]
fn malformed_config_exits_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "{ \"system\": ");
    assert_eq!(run("particles", &config, &dir.path().join("out"), &[]), 2);
    let config = write_config(dir.path(), r#"{"system": {"kind": "random", "count": 3, "dim": 3}, "t_end": 5, "dt": 0.001, "colour": 1}"#);
    assert_eq!(run("particles", &config, &dir.path().join("out"), &[]), 2);
}

#[test]
fn inadmissible_decay_exits_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let too_large = write_config(dir.path(), r#"{"g": {"kind": "exp", "c": 0.6, "tau": 10}, "eps": 0.05, "dim": 3}"#);
    assert_eq!(run("slowdecay", &too_large, &dir.path().join("a"), &[]), 2);
    let constant = write_config(dir.path(), r#"{"g": {"kind": "constant", "c": 0.3}, "eps": 0.05, "dim": 3}"#);
    assert_eq!(run("slowdecay", &constant, &dir.path().join("b"), &[]), 2);
}

#[test]
fn short_run_is_inconclusive_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        r#"{"system": {"kind": "random", "count": 8, "dim": 3}, "t_end": 2.0, "dt": 0.001}"#,
    );
    let out = dir.path().join("out");
    assert_eq!(run("particles", &config, &out, &["--seed", "5"]), 3);
    let written = fs::read_dir(&out).map(|d| d.count()).unwrap_or(0);
    assert_eq!(written, 0);
}

#[test]
fn same_seed_gives_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        r#"{"system": {"kind": "random", "count": 6, "dim": 3, "random_weights": true}, "t_end": 40.0, "dt": 0.001}"#,
    );
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    assert_eq!(run("particles", &config, &a, &["--seed", "9"]), 0);
    assert_eq!(run("particles", &config, &b, &["--seed", "9"]), 0);
    assert_eq!(run("particles", &config, &c, &["--seed", "10"]), 0);
    for name in ["trajectory.csv", "regime_report.json"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
    assert_ne!(fs::read(a.join("trajectory.csv")).unwrap(), fs::read(c.join("trajectory.csv")).unwrap());
}
