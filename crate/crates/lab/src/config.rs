//! Experiment configuration. Every field except `experiment` is optional;
//! missing values fall back to the acceptance-run defaults of each
//! experiment.

use crate::error::{LabError, Result};
use ctrw_core::dist::DistributionSpec;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::PathBuf;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    VerifyStableSampler,
    VerifyMlRenewal,
    VerifyTimeChange,
    VerifyEnConvergence,
    VerifyRelativeStability,
    CouplingPlan,
    CouplingTail,
    ParetoRateScan,
    QuenchedVariance,
    GeneralScheme,
    RwreAnnealing,
    VerifyJ1,
}

impl Experiment {
    pub const ALL: [Experiment; 12] = [
        Experiment::VerifyStableSampler,
        Experiment::VerifyMlRenewal,
        Experiment::VerifyTimeChange,
        Experiment::VerifyEnConvergence,
        Experiment::VerifyRelativeStability,
        Experiment::CouplingPlan,
        Experiment::CouplingTail,
        Experiment::ParetoRateScan,
        Experiment::QuenchedVariance,
        Experiment::GeneralScheme,
        Experiment::RwreAnnealing,
        Experiment::VerifyJ1,
    ];

    pub fn name(self) -> String {
        serde_json::to_value(self).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    /// independent draws per checkpoint
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    /// replicas per configuration (paths, scenarios, Monte Carlo repeats)
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reps: Option<usize>,
    /// independent seeds for experiments that vote across seeds
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_grid: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alphas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    /// truncation level m of ψ_m
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub j_max: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    /// grid step for subordinator skeletons
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub waiting: Option<DistributionSpec>,
    /// override of the pass threshold (p-value floor or z bound)
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
}

fn invalid(msg: impl Into<String>) -> LabError {
    LabError::ConfigInvalid(msg.into())
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment) -> Self {
        ExperimentConfig {
            experiment,
            seed: 0,
            out_dir: None,
            samples: None,
            reps: None,
            seeds: None,
            n: None,
            n_grid: None,
            alpha: None,
            alphas: None,
            s_grid: None,
            t_grid: None,
            levels: None,
            horizon: None,
            truncation: None,
            j_max: None,
            delta: None,
            dt: None,
            waiting: None,
            tolerance: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| invalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Structural checks that do not depend on the experiment.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("samples", self.samples), ("reps", self.reps), ("seeds", self.seeds), ("j_max", self.j_max)] {
            if v == Some(0) {
                return Err(invalid(format!("{name} must be positive")));
            }
        }
        if self.n == Some(0) {
            return Err(invalid("n must be positive"));
        }
        for (name, g) in [("n_grid", &self.n_grid), ("levels", &self.levels)] {
            if let Some(g) = g {
                if g.is_empty() {
                    return Err(invalid(format!("{name} is empty")));
                }
                if g.contains(&0) {
                    return Err(invalid(format!("{name} entries must be positive")));
                }
            }
        }
        for (name, g) in [("alphas", &self.alphas), ("s_grid", &self.s_grid), ("t_grid", &self.t_grid)] {
            if let Some(g) = g {
                if g.is_empty() || g.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
                    return Err(invalid(format!("{name} needs positive finite entries")));
                }
            }
        }
        let alphas = self.alpha.iter().chain(self.alphas.iter().flatten());
        if alphas.clone().any(|a| !(*a > 0.0 && *a < 1.0)) {
            return Err(invalid("alpha must lie in (0, 1)"));
        }
        for (name, v) in [("horizon", self.horizon), ("truncation", self.truncation), ("delta", self.delta), ("dt", self.dt), ("tolerance", self.tolerance)] {
            if let Some(v) = v {
                if !(v.is_finite() && v > 0.0) {
                    return Err(invalid(format!("{name} must be positive and finite")));
                }
            }
        }
        if let Some(w) = &self.waiting {
            w.validate().map_err(|e| invalid(format!("waiting: {e}")))?;
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).unwrap_or_default();
        Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn samples_or(&self, d: usize) -> usize {
        self.samples.unwrap_or(d)
    }

    pub fn reps_or(&self, d: usize) -> usize {
        self.reps.unwrap_or(d)
    }

    pub fn seeds_or(&self, d: usize) -> usize {
        self.seeds.unwrap_or(d)
    }

    pub fn n_or(&self, d: u64) -> u64 {
        self.n.unwrap_or(d)
    }

    pub fn n_grid_or(&self, d: &[u64]) -> Vec<u64> {
        self.n_grid.clone().unwrap_or_else(|| d.to_vec())
    }

    pub fn alpha_or(&self, d: f64) -> f64 {
        self.alpha.unwrap_or(d)
    }

    pub fn alphas_or(&self, d: &[f64]) -> Vec<f64> {
        self.alphas.clone().unwrap_or_else(|| d.to_vec())
    }

    pub fn s_grid_or(&self, d: &[f64]) -> Vec<f64> {
        self.s_grid.clone().unwrap_or_else(|| d.to_vec())
    }

    pub fn t_grid_or(&self, d: &[f64]) -> Vec<f64> {
        self.t_grid.clone().unwrap_or_else(|| d.to_vec())
    }

    pub fn levels_or(&self, d: &[u64]) -> Vec<u64> {
        self.levels.clone().unwrap_or_else(|| d.to_vec())
    }

    pub fn horizon_or(&self, d: f64) -> f64 {
        self.horizon.unwrap_or(d)
    }

    pub fn truncation_or(&self, d: f64) -> f64 {
        self.truncation.unwrap_or(d)
    }

    pub fn j_max_or(&self, d: usize) -> usize {
        self.j_max.unwrap_or(d)
    }

    pub fn delta_or(&self, d: f64) -> f64 {
        self.delta.unwrap_or(d)
    }

    pub fn dt_or(&self, d: f64) -> f64 {
        self.dt.unwrap_or(d)
    }

    pub fn waiting_or(&self, d: DistributionSpec) -> DistributionSpec {
        self.waiting.clone().unwrap_or(d)
    }

    pub fn tolerance_or(&self, d: f64) -> f64 {
        self.tolerance.unwrap_or(d)
    }
}
