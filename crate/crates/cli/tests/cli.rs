use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_brenier-lab"))
}

fn sample(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("config.toml");
    fs::write(&path, text).unwrap();
    path
}

fn run(config: &Path, out: &Path, extra: &[&str]) -> Output {
    bin()
        .arg("run")
        .arg(config)
        .arg("--out-dir")
        .arg(out)
        .args(extra)
        .output()
        .unwrap()
}

fn report(out: &Path) -> Value {
    serde_json::from_slice(&fs::read(out.join("report.json")).unwrap()).unwrap()
}

const POINCARE: &str = r#"
scenario = "poincare"

[measure]
family = "gaussian-scaled"
dimension = 1
sigma = 1.0
"#;

#[test]
fn validate_accepts_the_samples() {
    for entry in fs::read_dir(sample("")).unwrap() {
        let path = entry.unwrap().path();
        let out = bin().arg("validate").arg(&path).output().unwrap();
        assert!(
            out.status.success(),
            "{}: {}",
            path.display(),
            String::from_utf8_lossy(&out.stderr)
        );
    }
}

#[test]
fn validate_reports_one_diagnostic_per_problem() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        &POINCARE.replace("dimension = 1", "dimension = 7"),
    );
    let out = bin().arg("validate").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.lines().count(), 1);
    assert!(err.contains("dimension out of range [1,4]"));

    let cfg = write_config(dir.path(), &format!("{POINCARE}\n[numerics]\nreg = -1.0\n"));
    let out = bin().arg("validate").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.lines().count(), 1);
    assert!(err.contains("numerics.reg"));
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = bin()
        .arg("validate")
        .arg(dir.path().join("nope.toml"))
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(2));

    let cfg = write_config(dir.path(), "scenario = \"poincare\"\n[measure\n");
    let out = bin().arg("validate").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("line 2"));

    let cfg = write_config(dir.path(), &format!("{POINCARE}\n[numerics]\nspeed = 3\n"));
    let out = run(&cfg, &dir.path().join("out"), &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("speed"));
}

#[test]
fn poincare_on_the_standard_gaussian() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&sample("poincare_gaussian.toml"), dir.path(), &[]);
    assert!(out.status.success());
    let r = report(dir.path());
    assert!((r["results"]["gap"].as_f64().unwrap() - 1.0).abs() < 1e-8);
    assert_eq!(r["passed"], true);
    assert_eq!(r["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(r["config"]["measure"]["family"], "gaussian-scaled");
    assert!(dir.path().join("eigenvalues.csv").exists());
    assert!(dir.path().join("metadata.json").exists());
}

#[test]
fn contraction_on_a_quartic() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        &sample("contraction_quartic_1d.toml"),
        dir.path(),
        &["--quiet"],
    );
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let r = report(dir.path());
    let d = &r["results"]["defect"];
    assert!(d["upper"].as_f64().unwrap() <= 1e-8 && d["lower"].as_f64().unwrap() <= 1e-8);
    let csv = fs::read_to_string(dir.path().join("profile.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("x1,weight,lambda1"));
}

#[test]
fn scaling_curve_has_a_constant_ratio() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&sample("stability_scaling_1d.toml"), dir.path(), &[]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = fs::read_to_string(dir.path().join("curve.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("t,epsilon,gap,ratio,k_detected,provenance")
    );
    let ratios: Vec<f64> = lines
        .filter_map(|l| l.split(',').nth(3).and_then(|r| r.parse().ok()))
        .collect();
    assert_eq!(ratios.len(), 5);
    for r in ratios {
        assert!((r - 0.7978845608028654).abs() < 1e-4);
    }
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        assert!(
            run(&sample("rigidity_gaussian_quartic.toml"), out, &["--quiet"])
                .status
                .success()
        );
    }
    for name in ["report.json", "rotation.csv", "mu2.csv", "profile.csv"] {
        assert_eq!(
            fs::read(a.join(name)).unwrap(),
            fs::read(b.join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn violated_invariant_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        &sample("poincare_gaussian.toml"),
        dir.path(),
        &["--override", "checks.expect_gap=2.0"],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stderr)
        .unwrap()
        .contains("poincare-expected"));
    assert_eq!(report(dir.path())["passed"], false);
}

#[test]
fn numerical_failure_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"
scenario = "certificate"
[measure]
family = "gaussian-scaled"
dimension = 1
sigma = 2.0
"#,
    );
    let out = run(&cfg, &dir.path().join("out"), &[]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8(out.stderr)
        .unwrap()
        .contains("hypothesis-failure"));
}

#[test]
fn overrides_change_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        &sample("contraction_quartic_1d.toml"),
        dir.path(),
        &["--override", "measure.a=0.25", "--quiet"],
    );
    assert!(out.status.success());
    assert_eq!(report(dir.path())["config"]["measure"]["a"], 0.25);
}
