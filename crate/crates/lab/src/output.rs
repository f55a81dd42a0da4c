//! Artifact writing: one CSV per table, extra text artifacts, `reports.json`
//! and `manifest.json`.

use crate::config::ExperimentConfig;
use crate::error::{LabError, Result};
use crate::experiments::{execute, Outcome};
use ctrw_core::stats::StatReport;
use serde::Serialize;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub experiment: String,
    pub config_sha256: String,
    pub seed: u64,
    pub git_describe: String,
    pub threads: usize,
    pub wall_time_s: f64,
    pub pass: bool,
    pub files: Vec<String>,
    pub reports: Vec<StatReport>,
    pub summary: serde_json::Value,
}

#[derive(Debug)]
pub struct RunResult {
    pub manifest: Manifest,
    pub outcome: Outcome,
    pub out_dir: PathBuf,
}

fn git_describe() -> String {
    Command::new("git")
        .args(["describe", "--always", "--dirty"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_owned())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "unknown".into())
}

fn write(dir: &Path, name: &str, body: &str, files: &mut Vec<String>) -> Result<()> {
    fs::write(dir.join(name), body)?;
    files.push(name.to_owned());
    Ok(())
}

/// Runs `cfg` on a pool of `threads` workers (rayon's default when `None`)
/// and writes the artifacts into `out`.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path, threads: Option<usize>) -> Result<RunResult> {
    cfg.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        if t == 0 {
            return Err(LabError::ConfigInvalid("threads must be positive".into()));
        }
        builder = builder.num_threads(t);
    }
    let pool = builder.build().map_err(|e| LabError::ConfigInvalid(e.to_string()))?;
    let start = Instant::now();
    let outcome = pool.install(|| execute(cfg))?;
    let wall = start.elapsed().as_secs_f64();

    fs::create_dir_all(out)?;
    let mut files = Vec::new();
    write(out, "config.json", &serde_json::to_string_pretty(cfg)?, &mut files)?;
    for t in &outcome.tables {
        write(out, &format!("{}.csv", t.name), &t.to_csv(), &mut files)?;
    }
    for (name, body) in &outcome.files {
        write(out, name, body, &mut files)?;
    }
    write(out, "reports.json", &serde_json::to_string_pretty(&outcome.reports)?, &mut files)?;
    let manifest = Manifest {
        experiment: cfg.experiment.name(),
        config_sha256: cfg.hash(),
        seed: cfg.seed,
        git_describe: git_describe(),
        threads: pool.current_num_threads(),
        wall_time_s: wall,
        pass: outcome.pass(),
        files,
        reports: outcome.reports.clone(),
        summary: outcome.summary.clone(),
    };
    fs::write(out.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(RunResult { manifest, outcome, out_dir: out.to_path_buf() })
}
