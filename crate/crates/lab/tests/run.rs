use ctrw_lab::{execute, run_experiment, Experiment, ExperimentConfig, LabError};
use std::fs;
use std::process::Command;

fn small(experiment: Experiment) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(experiment);
    cfg.seed = 17;
    cfg
}

#[test]
fn artifacts_do_not_depend_on_thread_count() {
    let mut cfg = small(Experiment::VerifyMlRenewal);
    cfg.samples = Some(5000);
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let ra = run_experiment(&cfg, a.path(), Some(1)).unwrap();
    let rb = run_experiment(&cfg, b.path(), Some(3)).unwrap();
    assert_eq!(ra.manifest.files, rb.manifest.files);
    for f in &ra.manifest.files {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    assert_eq!(ra.manifest.config_sha256, rb.manifest.config_sha256);
}

#[test]
fn manifest_records_the_run() {
    let cfg = small(Experiment::CouplingPlan);
    let dir = tempfile::tempdir().unwrap();
    let run = run_experiment(&cfg, dir.path(), None).unwrap();
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["experiment"], "coupling-plan");
    assert_eq!(m["seed"], 17);
    assert_eq!(m["config_sha256"].as_str().unwrap(), cfg.hash());
    assert!(m["git_describe"].as_str().is_some_and(|s| !s.is_empty()));
    assert!(m["wall_time_s"].as_f64().unwrap() >= 0.0);
    assert_eq!(m["pass"], true);
    assert!(run.manifest.files.contains(&"worked_plan.csv".to_string()));
    let csv = fs::read_to_string(dir.path().join("blocks.csv")).unwrap();
    assert!(csv.starts_with("lo,hi,customers,servers,residual_plus,residual_minus\n"));
}

#[test]
fn reports_recompute() {
    let mut cfg = small(Experiment::VerifyStableSampler);
    cfg.samples = Some(20_000);
    let out = execute(&cfg).unwrap();
    assert_eq!(out.reports.len(), 9);
    for r in &out.reports {
        assert_eq!(r.pass, r.recompute_pass());
    }
}

#[test]
fn different_seeds_differ() {
    let mut cfg = small(Experiment::VerifyMlRenewal);
    cfg.samples = Some(2000);
    let a = execute(&cfg).unwrap();
    cfg.seed += 1;
    let b = execute(&cfg).unwrap();
    assert_ne!(a.tables[0].rows, b.tables[0].rows);
}

#[test]
fn empty_n_grid_is_rejected() {
    let mut cfg = small(Experiment::ParetoRateScan);
    cfg.n_grid = Some(vec![]);
    assert!(matches!(execute(&cfg), Err(LabError::ConfigInvalid(_))));
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(run_experiment(&cfg, dir.path(), None), Err(LabError::ConfigInvalid(_))));
}

#[test]
fn cli_exit_status() {
    let bin = env!("CARGO_BIN_EXE_ctrw-lab");
    let dir = tempfile::tempdir().unwrap();
    let ok = Command::new(bin).args(["coupling-plan", "--seed", "3", "--out"]).arg(dir.path()).output().unwrap();
    assert!(ok.status.success(), "{}", String::from_utf8_lossy(&ok.stderr));
    assert!(String::from_utf8_lossy(&ok.stdout).contains("PASS block [4,8) residual"));

    let cfg_path = dir.path().join("bad.json");
    fs::write(&cfg_path, r#"{"experiment": "pareto-rate-scan", "n_grid": []}"#).unwrap();
    let bad = Command::new(bin).arg("pareto-rate-scan").arg("--config").arg(&cfg_path).arg("--out").arg(dir.path().join("x")).output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("invalid config"));

    fs::write(&cfg_path, r#"{"experiment": "verify-j1"}"#).unwrap();
    let mismatch = Command::new(bin).arg("coupling-tail").arg("--config").arg(&cfg_path).output().unwrap();
    assert_eq!(mismatch.status.code(), Some(2));
}

#[test]
fn failing_report_gives_exit_one() {
    let bin = env!("CARGO_BIN_EXE_ctrw-lab");
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("tight.json");
    fs::write(&cfg_path, r#"{"experiment": "verify-stable-sampler", "samples": 1000, "tolerance": 1e-12}"#).unwrap();
    let out = Command::new(bin).arg("verify-stable-sampler").arg("--config").arg(&cfg_path).arg("--out").arg(dir.path().join("o")).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL"));
}
