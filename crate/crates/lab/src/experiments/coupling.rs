use super::{exact, replicate, Outcome, Table};
use crate::config::ExperimentConfig;
use crate::error::Result;
use ctrw_core::coupling::{dyadic_coupling, path_coupling_distance, rate_scan as core_rate_scan, truncation_plan, DiscretizedTail, Pairing, RateScanPlan};
use ctrw_core::dist::DistributionSpec;
use ctrw_core::special::gamma;
use ctrw_core::stats::fit_power_law;
use ctrw_core::RngStream;
use serde_json::json;

/// Block [4, 8) with customer excesses -0.2, -0.4 at I₄, I₅ and server
/// excesses 0.1, 0.7 at I₆, I₇.
fn worked_example() -> Result<ctrw_core::coupling::CouplingPlan> {
    let f1 = DiscretizedTail::from_masses(&[0.0, 0.0, 0.0, 0.0, 0.1, 0.0, 0.1, 0.7], 0.0)?;
    let f2 = DiscretizedTail::from_masses(&[0.0, 0.0, 0.0, 0.0, 0.3, 0.4, 0.0, 0.0], 0.0)?;
    Ok(dyadic_coupling(&f1, &f2)?)
}

pub fn coupling_plan(cfg: &ExperimentConfig) -> Result<Outcome> {
    let plan = worked_example()?;
    let block = plan.blocks.iter().find(|b| b.lo == 4).copied();
    let residual = block.map_or(f64::NAN, |b| b.residual());
    let mut out = Outcome::default();
    out.reports.push(exact("block [4,8) residual", (residual - 0.2).abs() <= 1e-15, residual, "0.2 within 1e-15"));
    let two = plan.find_i_bad(2).contains(&4);
    let four = plan.find_i_bad(4).contains(&4);
    out.reports.push(exact("I4 is 2-bad", two, two as u8 as f64, "true"));
    out.reports.push(exact("I4 is not 4-bad", !four, four as u8 as f64, "false"));
    out.files.push(("worked_plan.csv".into(), plan.to_csv()));
    let mut table = Table::new("blocks", &["lo", "hi", "customers", "servers", "residual_plus", "residual_minus"]);
    for b in &plan.blocks {
        table.push(vec![b.lo as f64, b.hi as f64, b.customers, b.servers, b.residual_plus, b.residual_minus]);
    }
    out.tables.push(table);

    // the Pareto/ψ_m plan, when asked for
    if let Some(alpha) = cfg.alpha {
        let m = cfg.truncation_or(10.0);
        let p = truncation_plan(&DistributionSpec::pareto_canonical(alpha), alpha, m, cfg.j_max_or(1024))?;
        let unpaired = p.unpaired_x + p.unpaired_y;
        out.reports.push(exact("pareto plan fully paired", unpaired <= 1e-12, unpaired, "<= 1e-12"));
        out.files.push(("pareto_plan.csv".into(), p.to_csv()));
    }
    out.summary = json!({ "block_residual": residual, "bad_2": plan.find_i_bad(2), "bad_4": plan.find_i_bad(4) });
    Ok(out)
}

/// P(|X - Y| > i) under the dyadic plan for Pareto(α) and its ψ_m-image,
/// divided by the Pareto tail i^{-α}/Γ(1-α).
pub fn coupling_tail(cfg: &ExperimentConfig) -> Result<Outcome> {
    let alpha = cfg.alpha_or(0.5);
    let m = cfg.truncation_or(10.0);
    let j_max = cfg.j_max_or(1 << 16);
    let levels = cfg.levels_or(&[8, 16, 32, 64, 128]);
    let plan = truncation_plan(&DistributionSpec::pareto_canonical(alpha), alpha, m, j_max)?;
    let mut table = Table::new("coupled_tail", &["level", "cross", "residual", "beyond_shift", "beyond_uncertified", "total", "pareto_tail", "ratio"]);
    let mut ratios = Vec::with_capacity(levels.len());
    for &i in &levels {
        let t = plan.coupled_tail_parts(i)?;
        let reference = (i as f64).powf(-alpha) / gamma(1.0 - alpha);
        let ratio = t.total / reference;
        ratios.push(ratio);
        table.push(vec![i as f64, t.cross, t.residual, t.beyond_shift, t.beyond_uncertified, t.total, reference, ratio]);
    }
    let mut out = Outcome::default();
    for (k, w) in ratios.windows(2).enumerate() {
        out.reports.push(exact(&format!("ratio({}) < ratio({})", levels[k + 1], levels[k]), w[1] < w[0], w[1], format!("< {:.6e}", w[0])));
    }
    out.tables.push(table);
    out.summary = json!({ "alpha": alpha, "m": m, "j_max": j_max, "levels": levels, "ratios": ratios });
    Ok(out)
}

/// ε̂(n) over the n grid for independent seeds, a pooled log-log fit, and the
/// theoretical exponent for comparison.
pub fn rate_scan(cfg: &ExperimentConfig, rng: &RngStream) -> Result<Outcome> {
    let alpha = cfg.alpha_or(0.5);
    let m = cfg.truncation_or(10.0);
    let j_max = cfg.j_max_or(1 << 16);
    let seeds = cfg.seeds_or(20);
    let reps = cfg.reps_or(1000);
    let horizon = cfg.horizon_or(1.0);
    let n_grid = cfg.n_grid_or(&[100, 316, 1000, 3162]);
    // the Pareto example has β = ∞ (no second tail term)
    let scan = RateScanPlan::new(alpha, f64::INFINITY, n_grid.clone(), None)?;
    let plan = truncation_plan(&DistributionSpec::pareto_canonical(alpha), alpha, m, j_max)?;
    let runs = replicate(&rng.child(0), seeds, |_, r| core_rate_scan(&scan, &plan, Pairing::Plan, horizon, reps, r))?;

    let mut out = Outcome::default();
    let mut table = Table::new("rate_scan", &["seed", "n", "eps_hat", "eps_hat_window", "mean_matched_bound", "m1", "m2"]);
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    let mut monotone = 0;
    for (s, run) in runs.iter().enumerate() {
        for p in &run.points {
            table.push(vec![s as f64, p.n as f64, p.eps_hat, p.eps_hat_window, p.mean_matched_bound, p.m1, p.m2]);
            xs.push(p.n as f64);
            ys.push(p.eps_hat);
        }
        if run.points.windows(2).all(|w| w[1].eps_hat <= w[0].eps_hat) {
            monotone += 1;
        }
    }
    let need = (seeds * 9).div_ceil(10);
    out.reports.push(exact("seeds with non-increasing eps_hat", monotone >= need, monotone as f64, format!(">= {need} of {seeds}")));
    let fit = fit_power_law(&xs, &ys, &mut rng.child(1))?;
    out.reports.push(exact("pooled slope negative, 95% CI excludes 0", fit.exponent < 0.0 && fit.ci_high < 0.0, fit.exponent, format!("CI [{:.4}, {:.4}]", fit.ci_low, fit.ci_high)));
    out.reports.push(exact("xi0 at the configured alpha", (scan.xi0 - alpha / (7.0 * alpha + 4.0)).abs() <= 1e-15, scan.xi0, "alpha/(7 alpha + 4)"));

    let control = path_coupling_distance(&plan, alpha, Pairing::Identical, n_grid[0], 0.1, horizon, reps.min(200), &mut rng.child(2))?;
    out.reports.push(exact("identical pairing gives eps_hat 0", control.eps_hat == 0.0, control.eps_hat, "0"));

    let mut fits = Table::new("fit", &["exponent", "intercept", "ci_low", "ci_high", "fitted_c", "xi0_statement", "xi0_proof", "c_target"]);
    fits.push(vec![fit.exponent, fit.intercept, fit.ci_low, fit.ci_high, -fit.exponent, scan.xi0, runs[0].xi0_proof, scan.c]);
    out.tables.push(table);
    out.tables.push(fits);
    out.summary = json!({
        "alpha": alpha,
        "seeds": seeds,
        "reps": reps,
        "n_grid": n_grid,
        "monotone_seeds": monotone,
        "fitted_exponent": fit.exponent,
        "ci": [fit.ci_low, fit.ci_high],
        "fitted_c": -fit.exponent,
        "xi0_statement": scan.xi0,
        "xi0_proof": runs[0].xi0_proof,
        "c_target": scan.c,
    });
    Ok(out)
}
