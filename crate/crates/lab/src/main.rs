use clap::Parser;
use ctrw_lab::{run_experiment, Experiment, ExperimentConfig, LabError};
use std::path::PathBuf;
use std::process::ExitCode;

/// Run one seeded experiment and write CSV tables plus a JSON manifest.
#[derive(Parser, Debug)]
#[command(name = "ctrw-lab", version)]
struct Cli {
    #[arg(value_enum)]
    experiment: Experiment,
    /// JSON config; defaults are used for every field it leaves out
    #[arg(long)]
    config: Option<PathBuf>,
    /// overrides the seed in the config
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
}

fn load(cli: &Cli) -> Result<ExperimentConfig, LabError> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::from_json(&std::fs::read_to_string(path)?)?,
        None => ExperimentConfig::new(cli.experiment),
    };
    if cfg.experiment != cli.experiment {
        return Err(LabError::ConfigInvalid(format!("config is for {}, not {}", cfg.experiment.name(), cli.experiment.name())));
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = load(&cli).and_then(|cfg| {
        let out = cli.out.clone().or_else(|| cfg.out_dir.clone()).unwrap_or_else(|| PathBuf::from("out").join(cfg.experiment.name()));
        run_experiment(&cfg, &out, cli.threads)
    });
    match result {
        Ok(run) => {
            for r in &run.manifest.reports {
                let kind = if r.is_p_value { "p" } else { "score" };
                println!("{} {}: value={:.6e} {kind}={:.4e} threshold={} ({})", if r.pass { "PASS" } else { "FAIL" }, r.name, r.value, r.score, r.threshold, r.reference);
            }
            println!("{}", serde_json::to_string_pretty(&run.manifest.summary).unwrap_or_default());
            println!("artifacts in {} ({:.2} s)", run.out_dir.display(), run.manifest.wall_time_s);
            if run.manifest.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
