//! The experiments behind each subcommand.

mod coupling;
mod paths;
mod sampling;

use crate::config::{Experiment, ExperimentConfig};
use crate::error::Result;
use ctrw_core::stats::StatReport;
use ctrw_core::RngStream;
use rayon::prelude::*;
use serde::Serialize;

/// Plot-ready numeric table, written as `<name>.csv`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Table { name: name.into(), header: header.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// Header row, then every value with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|v| format!("{v:.16e}")).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Outcome {
    pub reports: Vec<StatReport>,
    pub tables: Vec<Table>,
    /// extra artifacts as (file name, contents)
    pub files: Vec<(String, String)>,
    pub summary: serde_json::Value,
}

impl Outcome {
    pub fn pass(&self) -> bool {
        self.reports.iter().all(|r| r.pass)
    }

    pub fn report(&self, name: &str) -> Option<&StatReport> {
        self.reports.iter().find(|r| r.name == name)
    }
}

pub fn execute(cfg: &ExperimentConfig) -> Result<Outcome> {
    cfg.validate()?;
    let rng = RngStream::new(cfg.seed, 0);
    match cfg.experiment {
        Experiment::VerifyStableSampler => sampling::stable_sampler(cfg, &rng),
        Experiment::VerifyMlRenewal => sampling::ml_renewal(cfg, &rng),
        Experiment::VerifyEnConvergence => sampling::en_convergence(cfg, &rng),
        Experiment::VerifyRelativeStability => sampling::relative_stability(cfg, &rng),
        Experiment::GeneralScheme => sampling::general_scheme(cfg, &rng),
        Experiment::VerifyTimeChange => paths::time_change(cfg, &rng),
        Experiment::RwreAnnealing => paths::rwre_annealing(cfg, &rng),
        Experiment::QuenchedVariance => paths::quenched_variance(cfg, &rng),
        Experiment::VerifyJ1 => paths::verify_j1(cfg, &rng),
        Experiment::CouplingPlan => coupling::coupling_plan(cfg),
        Experiment::CouplingTail => coupling::coupling_tail(cfg),
        Experiment::ParetoRateScan => coupling::rate_scan(cfg, &rng),
    }
}

/// `count` independent replicas on the worker pool; replica `i` draws from
/// `rng.child(i)`, so results do not depend on scheduling.
pub(crate) fn replicate<T, F>(rng: &RngStream, count: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, &mut RngStream) -> ctrw_core::Result<T> + Sync + Send,
{
    let out: ctrw_core::Result<Vec<T>> = (0..count)
        .into_par_iter()
        .map(|i| {
            let mut r = rng.child(i as u64);
            f(i, &mut r)
        })
        .collect();
    Ok(out?)
}

const CHUNK: usize = 1000;

/// `n` scalar draws, generated in fixed chunks of one child stream each.
pub(crate) fn draws<F>(rng: &RngStream, n: usize, f: F) -> Result<Vec<f64>>
where
    F: Fn(&mut RngStream) -> ctrw_core::Result<f64> + Sync + Send,
{
    let chunks = replicate(rng, n.div_ceil(CHUNK), |c, r| (c * CHUNK..(n.min((c + 1) * CHUNK))).map(|_| f(r)).collect::<ctrw_core::Result<Vec<f64>>>())?;
    Ok(chunks.concat())
}

/// Pass/fail check carried as a StatReport: score 0 on success, 1 on failure.
pub(crate) fn exact(name: &str, ok: bool, value: f64, reference: impl Into<String>) -> StatReport {
    StatReport::new(name, value, reference, if ok { 0.0 } else { 1.0 }, false, 0.5)
}

/// Passes iff value < bound; the score is value / bound.
pub(crate) fn below(name: &str, value: f64, bound: f64) -> StatReport {
    StatReport::new(name, value, format!("< {bound:e}"), value / bound, false, 1.0)
}

pub(crate) fn named(mut r: StatReport, name: String, reference: String, threshold: f64) -> StatReport {
    r.name = name;
    r.reference = reference;
    r.threshold = threshold;
    r.pass = r.recompute_pass();
    r
}

/// Quantiles of `xs` at `probs`, by the empirical inverse CDF.
pub(crate) fn quantiles(xs: &[f64], probs: &[f64]) -> Vec<f64> {
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    probs.iter().map(|p| s[((p * s.len() as f64).ceil() as usize).clamp(1, s.len()) - 1]).collect()
}

pub(crate) fn percent_grid() -> Vec<f64> {
    (1..100).map(|k| k as f64 / 100.0).collect()
}
