//! Seeded, configurable experiments over `ctrw-core`, with CSV and manifest
//! output. Each experiment backs one `ctrw-lab` subcommand.

pub mod config;
pub mod error;
pub mod experiments;
pub mod output;

pub use config::{Experiment, ExperimentConfig};
pub use error::{LabError, Result};
pub use experiments::{execute, Outcome, Table};
pub use output::{run_experiment, Manifest, RunResult};
