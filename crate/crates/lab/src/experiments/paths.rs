use super::{exact, named, replicate, Outcome, Table};
use crate::config::ExperimentConfig;
use crate::error::Result;
use ctrw_core::ctrw::{quenched_type1, quenched_type2, quenched_variance_check, scaled_ctrw_pair, SpatialLaw, TemporalLandscape, TimeChangedRepresentation};
use ctrw_core::dist::DistributionSpec;
use ctrw_core::paths::{j1_exact_small, j1_upper, MonotoneMap, StepPath};
use ctrw_core::stats::ks_two_sample;
use ctrw_core::symbol::{build_truncation_symbol, BernsteinSymbol, LevyMeasure, TruncationForm};
use ctrw_core::RngStream;
use rand::Rng;
use serde_json::json;

#[path = "../../../core/tests/support/j1_oracle.rs"]
mod j1_oracle;

fn exp1() -> DistributionSpec {
    DistributionSpec::Exponential { rate: 1.0 }
}

/// Three representations cycled over the scenarios: Pareto waits with a
/// drifted stable symbol, exponential waits with wait-dependent jumps, and
/// truncated Pareto waits (atom at 0) with ψ_m.
fn time_change_models() -> Result<Vec<(TimeChangedRepresentation, f64)>> {
    let drifted = BernsteinSymbol::new(0.5, Some(LevyMeasure::StablePower { alpha: 0.6, scale: 1.0 }))?;
    let a = TimeChangedRepresentation::new(DistributionSpec::Pareto { alpha: 1.2, x_m: 0.5 }, drifted, SpatialLaw::Lattice { dim: 2, step: 1.0 })?;
    let b = TimeChangedRepresentation::new(exp1(), BernsteinSymbol::stable(0.7, 1.0)?, SpatialLaw::WaitVariance { cap: 2.0, scale: 1.0 })?;
    let w = DistributionSpec::pareto_canonical(0.5);
    let (psi, _) = build_truncation_symbol(&w, 10.0, TruncationForm::Stable { alpha: 0.5 })?;
    let c = TimeChangedRepresentation::new(DistributionSpec::truncated(w, 10.0), psi, SpatialLaw::Gaussian { dim: 1, sigma: 1.0 })?;
    Ok(vec![(a, 10.0), (b, 5.0), (c, 20.0)])
}

/// Y_t = (X_{E_t-})^+ on coupled scenarios, at jump epochs, just before them,
/// at 0, at the horizon and at uniform times.
pub fn time_change(cfg: &ExperimentConfig, rng: &RngStream) -> Result<Outcome> {
    let scenarios = cfg.reps_or(1000);
    let queries = cfg.samples_or(1000).max(4);
    let models = time_change_models()?;
    let rows = replicate(rng, scenarios, |i, r| {
        let (rep, horizon) = &models[i % models.len()];
        let s = rep.scenario(*horizon, r)?;
        let half = (queries - 2) / 2;
        let ep = s.y.epochs();
        let k = ep.len().min(half / 2);
        let mut ts = vec![0.0, *horizon];
        ts.extend_from_slice(&ep[..k]);
        ts.extend(ep[..k].iter().map(|t| t.next_down()));
        while ts.len() < queries {
            ts.push(horizon * r.open01());
        }
        Ok(vec![i as f64, (i % models.len()) as f64, s.y.n_jumps() as f64, ts.len() as f64, s.violations(&ts) as f64])
    })?;
    let mut table = Table::new("scenarios", &["scenario", "model", "jumps", "queries", "violations"]);
    let total: f64 = rows.iter().map(|r| r[4]).sum();
    let checked: f64 = rows.iter().map(|r| r[3]).sum();
    table.rows = rows;
    let mut out = Outcome::default();
    out.reports.push(exact("time-change violations", total == 0.0, total, format!("0 of {checked} queries")));
    out.tables.push(table);
    out.summary = json!({ "scenarios": scenarios, "queries_per_scenario": queries, "violations": total });
    Ok(out)
}

/// Marginals at fixed times of the direct scaled CTRW and of its annealed
/// type I (random time change of a renewal walk) and type II (random trap
/// depths) RWRE realizations.
pub fn rwre_annealing(cfg: &ExperimentConfig, rng: &RngStream) -> Result<Outcome> {
    let alpha = cfg.alpha_or(0.6);
    let n = cfg.n_or(1000);
    let samples = cfg.samples_or(10_000);
    let t_grid = cfg.t_grid_or(&[0.5, 1.0, 2.0]);
    let dt = cfg.dt_or(1e-4);
    let p_min = cfg.tolerance_or(0.01) / (2 * t_grid.len()) as f64;
    let horizon = t_grid.iter().copied().fold(0.0, f64::max);
    let spatial = SpatialLaw::Gaussian { dim: 1, sigma: (n as f64).powf(-0.5) };
    let pair = scaled_ctrw_pair(exp1(), BernsteinSymbol::stable(alpha, 1.0)?, spatial.clone(), n)?;
    let waits = DistributionSpec::scaled(exp1(), 1.0 / n as f64);
    let tau = DistributionSpec::PositiveStable { alpha, t: 1.0 };
    let trap = DistributionSpec::Weibull { shape: alpha, scale: 1.0 };
    let at = |p: &StepPath| t_grid.iter().map(|&t| p.eval1(t)).collect::<Vec<f64>>();
    let rows = replicate(rng, samples, |_, r| {
        let direct = pair.sample_y_direct(horizon, &mut r.child(0))?;
        let mut r1 = r.child(1);
        let xi = pair.environment(horizon, dt, &mut r1)?;
        let type1 = quenched_type1(&xi, &waits, &spatial, horizon, &mut r1)?;
        let mut r2 = r.child(2);
        let mut land = TemporalLandscape::new(tau.clone(), trap.clone(), false, pair.a_n, r2.split())?;
        let type2 = quenched_type2(&mut land, &spatial, horizon, &mut r2)?;
        Ok([at(&direct), at(&type1), at(&type2)])
    })?;
    let mut out = Outcome::default();
    let mut table = Table::new("ks", &["t", "route", "statistic", "p_value"]);
    for (k, &t) in t_grid.iter().enumerate() {
        let col = |route: usize| rows.iter().map(|r| r[route][k]).collect::<Vec<f64>>();
        let direct = col(0);
        for (route, label) in [(1, "type I"), (2, "type II")] {
            let ks = ks_two_sample(&col(route), &direct)?;
            table.push(vec![t, route as f64, ks.value, ks.score]);
            out.reports.push(named(ks, format!("ks {label} vs direct t={t}"), "same law".into(), p_min));
        }
    }
    out.tables.push(table);
    out.summary = json!({ "alpha": alpha, "n": n, "a_n": pair.a_n, "samples": samples, "dt": dt, "p_threshold": p_min });
    Ok(out)
}

/// Realized quadratic variation of the scaled quenched walk (waits U/n,
/// jump variance min(U, 1)/n) under identity, half-speed and plateau
/// environments. Unscaled, the last incomplete wait biases the mean by O(1).
pub fn quenched_variance(cfg: &ExperimentConfig, rng: &RngStream) -> Result<Outcome> {
    let n = cfg.n_or(1000);
    let waits = DistributionSpec::scaled(cfg.waiting_or(exp1()), 1.0 / n as f64);
    let reps = cfg.reps_or(2000);
    let t_grid = cfg.t_grid_or(&[1.0, 2.0, 5.0, 10.0]);
    let z_max = cfg.tolerance_or(3.0);
    let horizon = t_grid.iter().copied().fold(0.0, f64::max);
    let spatial = SpatialLaw::WaitVariance { cap: 1.0 / n as f64, scale: 1.0 };
    let plateau = MonotoneMap::new(vec![0.0, 0.2 * horizon, 0.5 * horizon, horizon], vec![0.0, 0.2 * horizon, 0.2 * horizon, 0.7 * horizon])?;
    let profiles = [("identity", MonotoneMap::identity(horizon)), ("half-speed", MonotoneMap::linear(0.5, horizon)), ("plateau", plateau)];
    let reports = replicate(rng, profiles.len(), |k, r| quenched_variance_check(&profiles[k].1, &waits, &spatial, &t_grid, reps, r))?;
    let mut out = Outcome::default();
    let mut table = Table::new("quenched_variance", &["profile", "t", "xi_t", "mean_qv", "predicted", "std_error", "z"]);
    for (k, rep) in reports.iter().enumerate() {
        for p in &rep.points {
            table.push(vec![k as f64, p.t, p.xi_t, p.mean, p.predicted, p.std_error, p.z]);
        }
        out.reports.push(ctrw_core::stats::StatReport::new(format!("max |z| {}", profiles[k].0), rep.max_abs_z, "xi(t) sigma^2_mu / E U", rep.max_abs_z, false, z_max));
    }
    out.tables.push(table);
    out.summary = json!({ "n": n, "reps": reps, "t_grid": t_grid });
    Ok(out)
}

/// Scalar path on [0, 1] with `m` distinct jump times. Lattice paths use
/// times k/10 and integer sizes so that ties and jumps at T occur.
fn random_path(rng: &mut RngStream, m: usize, lattice: bool, nonzero: bool) -> StepPath {
    let mut times: Vec<f64> = Vec::with_capacity(m);
    while times.len() < m {
        let t = if lattice { rng.random_range(1..=10) as f64 / 10.0 } else { rng.random::<f64>() };
        if !times.contains(&t) {
            times.push(t);
        }
    }
    times.sort_by(f64::total_cmp);
    let sizes: Vec<f64> = times
        .iter()
        .map(|_| {
            if lattice {
                let v = if nonzero { [-2, -1, 1, 2][rng.random_range(0..4)] } else { rng.random_range(-2i32..=2) };
                v as f64
            } else {
                rng.random::<f64>() * 4.0 - 2.0
            }
        })
        .collect();
    StepPath::from_jumps(1.0, vec![0.0], &times, &sizes).expect("valid jump data")
}

/// Exact J1 against exhaustive route enumeration, the explicit-λ upper bound
/// on equal-jump-count pairs, and the metric axioms.
pub fn verify_j1(cfg: &ExperimentConfig, rng: &RngStream) -> Result<Outcome> {
    let pairs = cfg.samples_or(500);
    let max_jumps = 6;
    let free = replicate(&rng.child(0), pairs, |k, r| {
        let lattice = k % 2 == 0;
        let (mf, mg) = (r.random_range(0..=max_jumps), r.random_range(0..=max_jumps));
        let (f, g) = (random_path(r, mf, lattice, false), random_path(r, mg, lattice, false));
        let e = j1_exact_small(&f, &g)?;
        Ok((e, j1_oracle::j1_oracle(&f, &g)))
    })?;
    let equal = replicate(&rng.child(1), pairs, |k, r| {
        let lattice = k % 2 == 0;
        let m = r.random_range(0..=max_jumps);
        let (f, g) = (random_path(r, m, lattice, true), random_path(r, m, lattice, true));
        let e = j1_exact_small(&f, &g)?;
        Ok((e, j1_oracle::j1_oracle(&f, &g), j1_upper(&f, &g)?))
    })?;
    let axioms = replicate(&rng.child(2), pairs, |k, r| {
        let lattice = k % 2 == 0;
        let mut p = || {
            let m = r.random_range(0..=max_jumps);
            random_path(r, m, lattice, false)
        };
        let (f, g, h) = (p(), p(), p());
        let fg = j1_exact_small(&f, &g)?;
        let gf = j1_exact_small(&g, &f)?;
        let ff = j1_exact_small(&f, &f)?;
        let fh = j1_exact_small(&f, &h)?;
        let hg = j1_exact_small(&h, &g)?;
        Ok([ff.abs(), (fg - gf).abs(), (fg - fh - hg).max(0.0)])
    })?;
    let oracle_mismatch = free.iter().filter(|(e, o)| e != o).count() + equal.iter().filter(|(e, o, _)| e != o).count();
    let upper_below = equal.iter().filter(|(e, _, u)| u < e).count();
    let worst = |i: usize| axioms.iter().fold(0.0_f64, |a, v| a.max(v[i]));
    let mut out = Outcome::default();
    out.reports.push(exact("j1 exact equals oracle", oracle_mismatch == 0, oracle_mismatch as f64, format!("0 mismatches over {} pairs", 2 * pairs)));
    out.reports.push(exact("j1_upper >= j1 exact", upper_below == 0, upper_below as f64, format!("0 violations over {pairs} pairs")));
    for (i, label) in ["identity", "symmetry", "triangle"].iter().enumerate() {
        out.reports.push(exact(&format!("j1 {label}"), worst(i) <= 1e-9, worst(i), "<= 1e-9"));
    }
    let mut table = Table::new("pairs", &["set", "exact", "oracle", "upper"]);
    for (e, o) in &free {
        table.push(vec![0.0, *e, *o, f64::NAN]);
    }
    for (e, o, u) in &equal {
        table.push(vec![1.0, *e, *o, *u]);
    }
    out.tables.push(table);
    out.summary = json!({ "pairs": pairs, "max_jumps": max_jumps });
    Ok(out)
}
