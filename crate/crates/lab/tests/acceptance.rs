//! One PASS/FAIL line per acceptance criterion. Every size, threshold and
//! time budget is set here explicitly rather than taken from defaults.

use ctrw_lab::{execute, Experiment, ExperimentConfig, Outcome};
use std::process::ExitCode;
use std::time::Instant;

struct Criterion {
    id: u32,
    title: &'static str,
    budget_s: f64,
    config: ExperimentConfig,
    /// extra condition and a one-line digest of the outcome
    check: fn(&Outcome) -> (bool, String),
}

fn cfg(experiment: Experiment, seed: u64, edit: impl FnOnce(&mut ExperimentConfig)) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(experiment);
    c.seed = seed;
    edit(&mut c);
    c
}

fn column(out: &Outcome, table: &str, name: &str) -> Vec<f64> {
    let t = out.tables.iter().find(|t| t.name == table).expect("table present");
    let k = t.header.iter().position(|h| h == name).expect("column present");
    t.rows.iter().map(|r| r[k]).collect()
}

fn worst(out: &Outcome, is_p: bool) -> String {
    let rs = out.reports.iter().filter(|r| r.is_p_value == is_p);
    if is_p {
        format!("min p = {:.4}", rs.map(|r| r.score).fold(1.0, f64::min))
    } else {
        format!("max |z| = {:.3}", rs.map(|r| r.score.abs()).fold(0.0, f64::max))
    }
}

fn criteria() -> Vec<Criterion> {
    vec![
        Criterion {
            id: 1,
            title: "stable sampler LT within 3 standard errors (N = 1e6)",
            budget_s: 30.0,
            config: cfg(Experiment::VerifyStableSampler, 1, |c| {
                c.alphas = Some(vec![0.3, 0.5, 0.8]);
                c.s_grid = Some(vec![0.5, 1.0, 2.0]);
                c.samples = Some(1_000_000);
                c.tolerance = Some(3.0);
            }),
            check: |o| (o.reports.len() == 9, worst(o, false)),
        },
        Criterion {
            id: 2,
            title: "phi-mapped Exp(1) vs U^(1/alpha) D_1, KS p > 0.01 (N = 1e5)",
            budget_s: 60.0,
            config: cfg(Experiment::VerifyMlRenewal, 2, |c| {
                c.alpha = Some(0.5);
                c.samples = Some(100_000);
                c.tolerance = Some(0.01);
            }),
            check: |o| {
                let r = o.report("ks phi_mapped vs U^(1/alpha) D_1");
                (r.is_some(), r.map_or(String::new(), |r| format!("D = {:.4}, p = {:.4}", r.value, r.score)))
            },
        },
        Criterion {
            id: 3,
            title: "Y_t = (X_{E_t-})^+ exactly, 1e3 scenarios x 1e3 query times",
            budget_s: 120.0,
            config: cfg(Experiment::VerifyTimeChange, 3, |c| {
                c.reps = Some(1000);
                c.samples = Some(1000);
            }),
            check: |o| {
                let q: f64 = column(o, "scenarios", "queries").iter().sum();
                let v: f64 = column(o, "scenarios", "violations").iter().sum();
                (q == 1e6, format!("{v} violations in {q} queries"))
            },
        },
        Criterion {
            id: 4,
            title: "E^n(1) vs inverse-stable marginal at n = 1e4, KS p > 0.01 (N = 1e4)",
            budget_s: 300.0,
            config: cfg(Experiment::VerifyEnConvergence, 4, |c| {
                c.alpha = Some(0.5);
                c.truncation = Some(10.0);
                c.n = Some(10_000);
                c.samples = Some(10_000);
                c.horizon = Some(1.0);
                c.tolerance = Some(0.01);
            }),
            check: |o| (o.reports.len() == 1, worst(o, true)),
        },
        Criterion {
            id: 5,
            title: "worked dyadic example: residual 0.2, I4 2-bad and not 4-bad",
            budget_s: 1.0,
            config: cfg(Experiment::CouplingPlan, 5, |_| {}),
            check: |o| {
                let r = o.report("block [4,8) residual").map_or(f64::NAN, |r| r.value);
                (o.reports.len() == 3, format!("residual = {r:.17}"))
            },
        },
        Criterion {
            id: 6,
            title: "coupled_tail(i) / (i^-alpha / Gamma(1-alpha)) strictly decreasing over i = 8..128",
            budget_s: 60.0,
            config: cfg(Experiment::CouplingTail, 6, |c| {
                c.alpha = Some(0.5);
                c.truncation = Some(10.0);
                c.levels = Some(vec![8, 16, 32, 64, 128]);
            }),
            check: |o| {
                let r = column(o, "coupled_tail", "ratio");
                let s: Vec<String> = r.iter().map(|v| format!("{v:.4}")).collect();
                (r.len() == 5 && r.windows(2).all(|w| w[1] < w[0]), format!("ratios {}", s.join(" > ")))
            },
        },
        Criterion {
            id: 7,
            title: "rate scan: eps_hat non-increasing on >= 18/20 seeds, fitted exponent < 0 with CI excluding 0",
            budget_s: 1800.0,
            config: cfg(Experiment::ParetoRateScan, 7, |c| {
                c.alpha = Some(0.5);
                c.truncation = Some(10.0);
                c.seeds = Some(20);
                c.n_grid = Some(vec![100, 316, 1000, 3162]);
                c.horizon = Some(1.0);
            }),
            check: |o| {
                let s = &o.summary;
                let xi0 = s["xi0_statement"].as_f64().unwrap_or(f64::NAN);
                let ok = o.report("seeds with non-increasing eps_hat").is_some_and(|r| r.value >= 18.0) && (xi0 - 1.0 / 15.0).abs() < 1e-15;
                let text = format!(
                    "{} of 20 monotone, exponent {:.4} CI [{:.4}, {:.4}], c_hat {:.4}; theory: c < xi0 = {:.6} (1/15)",
                    s["monotone_seeds"], s["fitted_exponent"].as_f64().unwrap_or(f64::NAN), s["ci"][0].as_f64().unwrap_or(f64::NAN),
                    s["ci"][1].as_f64().unwrap_or(f64::NAN), s["fitted_c"].as_f64().unwrap_or(f64::NAN), xi0
                );
                (ok, text)
            },
        },
        Criterion {
            id: 8,
            title: "Var(a_n T_n) < 1e-3 at n = 1e5 and P(A_delta) > 0.99 at n = 1e4, delta = 0.05, T = 1",
            budget_s: 60.0,
            config: cfg(Experiment::VerifyRelativeStability, 8, |c| {
                c.n_grid = Some(vec![10_000, 100_000]);
                c.delta = Some(0.05);
                c.horizon = Some(1.0);
            }),
            check: |o| {
                let var = o.report("var(a_n T_n) n=100000").map(|r| r.value);
                let miss = o.report("1 - P(A_delta) n=10000 delta=0.05").map(|r| r.value);
                (var.is_some() && miss.is_some(), format!("var = {:.3e}, P(A) = {:.4}", var.unwrap_or(f64::NAN), 1.0 - miss.unwrap_or(f64::NAN)))
            },
        },
        Criterion {
            id: 9,
            title: "annealed type I / II vs direct CTRW at t = 0.5, 1, 2, KS p > 0.01/6 (N = 1e4, n = 1e3)",
            budget_s: 600.0,
            config: cfg(Experiment::RwreAnnealing, 9, |c| {
                c.n = Some(1000);
                c.samples = Some(10_000);
                c.t_grid = Some(vec![0.5, 1.0, 2.0]);
                c.tolerance = Some(0.01);
            }),
            check: |o| (o.reports.len() == 6 && o.reports.iter().all(|r| (r.threshold - 0.01 / 6.0).abs() < 1e-15), worst(o, true)),
        },
        Criterion {
            id: 10,
            title: "quenched variance z < 3 on identity, half-speed and plateau profiles",
            budget_s: 300.0,
            config: cfg(Experiment::QuenchedVariance, 10, |c| c.tolerance = Some(3.0)),
            check: |o| (o.reports.len() == 3, worst(o, false)),
        },
        Criterion {
            id: 11,
            title: "J1: exact = oracle on 500 pairs, j1_upper >= exact, metric axioms to 1e-9",
            budget_s: 60.0,
            config: cfg(Experiment::VerifyJ1, 11, |c| c.samples = Some(500)),
            check: |o| (o.reports.len() == 5, format!("{} checks", o.reports.len())),
        },
    ]
}

fn main() -> ExitCode {
    let only: Option<u32> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let mut failed = 0;
    for c in criteria().into_iter().filter(|c| only.is_none_or(|k| k == c.id)) {
        let start = Instant::now();
        let result = execute(&c.config);
        let secs = start.elapsed().as_secs_f64();
        let (pass, detail) = match &result {
            Ok(out) => {
                let (extra, text) = (c.check)(out);
                let failing: Vec<&str> = out.reports.iter().filter(|r| !r.pass).map(|r| r.name.as_str()).collect();
                let detail = if failing.is_empty() { text } else { format!("{text}; failing: {}", failing.join(", ")) };
                (out.pass() && extra && secs < c.budget_s, detail)
            }
            Err(e) => (false, format!("error: {e}")),
        };
        println!("{} criterion {}: {} | {} | {:.2} s (budget {} s)", if pass { "PASS" } else { "FAIL" }, c.id, c.title, detail, secs, c.budget_s);
        if !pass {
            failed += 1;
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
