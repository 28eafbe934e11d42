//! End-to-end runs of the `adiacheck` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use adiacheck::runner::RunReport;
use tempfile::TempDir;

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn adiacheck(mode: &str, cfg: &Path, out: &Path, workers: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_adiacheck"));
    cmd.arg(mode).arg("--config").arg(cfg).arg("--out").arg(out);
    cmd.env_remove("ADIACHECK_WORKERS");
    if let Some(w) = workers {
        cmd.env("ADIACHECK_WORKERS", w);
    }
    cmd.output().expect("binary runs")
}

fn write_config(dir: &TempDir, body: &str) -> PathBuf {
    let p = dir.path().join("config.json");
    fs::write(&p, body).unwrap();
    p
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn simulate_writes_series_and_report() {
    let dir = TempDir::new().unwrap();
    let out = adiacheck("simulate", &config("resonance_simulate.json"), dir.path(), None);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));

    let csv = fs::read_to_string(dir.path().join("series.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "tau,P_m,P_m_first_order,gamma_abs_01,theta_01,delta_10,e_0,e_1"
    );
    assert_eq!(lines.count(), 4097);

    let text = fs::read_to_string(dir.path().join("report.json")).unwrap();
    let report = RunReport::from_json(&text).unwrap();
    let survival = report.survival.as_ref().unwrap();
    assert!((survival.last - 0.0099).abs() < 1e-4);
    let again: serde_json::Value = serde_json::from_str(&report.to_json().unwrap()).unwrap();
    let original: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(again, original);
}

#[test]
fn outputs_are_deterministic() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    for dir in [&a, &b] {
        let out = adiacheck("check", &config("landau_zener.json"), dir.path(), None);
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    }
    let read = |d: &TempDir| fs::read(d.path().join("series.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
}

#[test]
fn configured_output_names_are_used() {
    let dir = TempDir::new().unwrap();
    let out = adiacheck("check", &config("xi_dominant_check.json"), dir.path(), None);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(dir.path().join("xi_dominant.csv").exists());
    let report = RunReport::from_json(&fs::read_to_string(dir.path().join("xi_dominant.json")).unwrap()).unwrap();
    let conditions = report.conditions.unwrap();
    assert!(conditions.pointwise().passed() && conditions.integral().passed());
    assert_eq!(report.oracle.unwrap().regime, "xi_dominant");
}

#[test]
fn oracle_and_dual_modes() {
    let dir = TempDir::new().unwrap();
    let out = adiacheck("oracle", &config("oracle_eta_dominant.json"), dir.path(), None);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let csv = fs::read_to_string(dir.path().join("series.csv")).unwrap();
    assert!(csv.starts_with("tau,P_closed_form,omega,mixing_angle,delta\n"));

    let dir = TempDir::new().unwrap();
    let out = adiacheck("dual", &config("dual_resonance.json"), dir.path(), None);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let report = RunReport::from_json(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    let dual = report.dual.unwrap();
    assert!(dual.gamma_residual <= 1e-5);
    assert_eq!(dual.comparison.summary, "b adiabatic, a not guaranteed");
}

#[test]
fn sweep_rows_ignore_the_worker_count() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    let one = adiacheck("sweep", &config("sweep_xi.json"), a.path(), Some("1"));
    assert_eq!(one.status.code(), Some(0), "{}", stderr(&one));
    let many = adiacheck("sweep", &config("sweep_xi.json"), b.path(), Some("4"));
    assert_eq!(many.status.code(), Some(0), "{}", stderr(&many));
    let read = |d: &TempDir| fs::read_to_string(d.path().join("sweep.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
    let csv = read(&a);
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows[0], "xi.constant,min_P,final_P,traditional,pointwise,integral,regime");
    assert_eq!(rows.len(), 6);
    assert!(rows[1].ends_with("eta_dominant_small_area"));
    assert!(rows[5].ends_with("pass,pass,pass,xi_dominant"));

    let bad = adiacheck("sweep", &config("sweep_xi.json"), a.path(), Some("zero"));
    assert_eq!(bad.status.code(), Some(2));
    assert!(stderr(&bad).contains("ADIACHECK_WORKERS"));
}

#[test]
fn configuration_errors_exit_with_2() {
    let dir = TempDir::new().unwrap();
    let cases = [
        (r#"{"schema_version": 1, "model": {"type": "spin_half", "eta": -1.0, "xi": {"kind": "constant", "value": 0.1}}, "grid": {"t_max": 2.0, "steps": 8}}"#, "model.eta"),
        (r#"{"schema_version": 1, "model": {"type": "spin_half", "eta": 1.0, "xi": {"kind": "constant", "value": 0.1}}, "grid": {"t_max": 2.0, "steps": 8}, "colour": 1}"#, "colour"),
        (r#"{"schema_version": 2, "model": {"type": "spin_half", "eta": 1.0, "xi": {"kind": "constant", "value": 0.1}}, "grid": {"t_max": 2.0, "steps": 8}}"#, "schema_version"),
        (r#"{"schema_version": 1, "model": {"type": "spin_half", "eta": 1.0, "xi": {"kind": "cubic"}}, "grid": {"t_max": 2.0, "steps": 8}}"#, "model.xi"),
        (r#"{"schema_version": 1, "mode": "dual", "model": {"type": "spin_half", "eta": 1.0, "xi": {"kind": "constant", "value": 0.1}}, "grid": {"t_max": 2.0, "steps": 8}}"#, "mode"),
    ];
    for (body, field) in cases {
        let cfg = write_config(&dir, body);
        let out = adiacheck("simulate", &cfg, dir.path(), None);
        assert_eq!(out.status.code(), Some(2), "{body}");
        assert!(stderr(&out).contains(field), "{field}: {}", stderr(&out));
    }
    let out = adiacheck("simulate", &dir.path().join("absent.json"), dir.path(), None);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn numerical_failures_exit_with_3() {
    let dir = TempDir::new().unwrap();
    // The levels touch (gap 2e-12) at tau = 1, which is a grid point.
    let cfg = write_config(
        &dir,
        r#"{"schema_version": 1, "model": {"type": "landau_zener", "eta": 1e-12, "xi": {"kind": "linear", "start": -1.0, "slope": 1.0}}, "grid": {"t_max": 2.0, "steps": 8}}"#,
    );
    let out = adiacheck("check", &cfg, dir.path(), None);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
    assert!(!dir.path().join("report.json").exists());
}

#[test]
fn time_independent_model_passes_vacuously() {
    let dir = TempDir::new().unwrap();
    let out = adiacheck("check", &config("static_check.json"), dir.path(), None);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(String::from_utf8_lossy(&out.stdout).contains("(no coupling)"));
    let report = RunReport::from_json(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    let conditions = report.conditions.unwrap();
    assert!(conditions.pairs.iter().all(|p| p.vacuous));
    assert!(conditions.traditional().passed() && conditions.pointwise().passed() && conditions.integral().passed());
    let survival = report.survival.unwrap();
    assert!((survival.min - 1.0).abs() < 1e-12 && (survival.last - 1.0).abs() < 1e-12);
}
