use super::{below, draws, named, percent_grid, quantiles, replicate, Outcome, Table};
use crate::config::ExperimentConfig;
use crate::error::Result;
use ctrw_core::ctrw::{general_scheme_ctrw, general_scheme_reference, renewal_epochs, residual_lifetime, scaled_ctrw_pair, scaled_renewal_time, DriverProcess, SpatialLaw};
use ctrw_core::dist::DistributionSpec;
use ctrw_core::paths::check_a_delta;
use ctrw_core::samplers::{sample_phi_mapped, sample_positive_stable, stable_std_tail};
use ctrw_core::stats::{ks_one_sample, ks_two_sample, StatReport};
use ctrw_core::symbol::{build_truncation_symbol, compute_a_n, BernsteinSymbol, TruncationForm};
use ctrw_core::RngStream;
use serde_json::json;
use std::f64::consts::PI;

fn exp1() -> DistributionSpec {
    DistributionSpec::Exponential { rate: 1.0 }
}

/// Mean of e^{-sX} against e^{-s^α} for X ~ S_α(1), as z-scores.
pub fn stable_sampler(cfg: &ExperimentConfig, rng: &RngStream) -> Result<Outcome> {
    let alphas = cfg.alphas_or(&[0.3, 0.5, 0.8]);
    let s_grid = cfg.s_grid_or(&[0.5, 1.0, 2.0]);
    let n = cfg.samples_or(1_000_000);
    let z_max = cfg.tolerance_or(3.0);
    let mut out = Outcome::default();
    let mut table = Table::new("laplace", &["alpha", "s", "mean", "target", "std_error", "z"]);
    for (a, &alpha) in alphas.iter().enumerate() {
        let xs = draws(&rng.child(a as u64), n, |r| Ok(sample_positive_stable(alpha, 1.0, r)))?;
        for &s in &s_grid {
            let (mut sum, mut sq) = (0.0, 0.0);
            for &x in &xs {
                let v = (-s * x).exp();
                sum += v;
                sq += v * v;
            }
            let nf = n as f64;
            let mean = sum / nf;
            let se = ((sq / nf - mean * mean).max(0.0) / nf).sqrt();
            let target = (-s.powf(alpha)).exp();
            let z = (mean - target) / se;
            table.push(vec![alpha, s, mean, target, se, z]);
            out.reports.push(StatReport::new(format!("lt alpha={alpha} s={s}"), mean, format!("exp(-s^alpha) = {target:.12}"), z, false, z_max));
        }
    }
    out.tables.push(table);
    out.summary = json!({ "samples": n, "alphas": alphas, "s_grid": s_grid });
    Ok(out)
}

/// X = -ln(u)·(sin(απ)/tan(απv) - cos(απ))^{1/α}, with LT 1/(1+s^α).
fn mittag_leffler_direct(alpha: f64, rng: &mut RngStream) -> f64 {
    let (u, v) = (rng.open01(), rng.open01());
    let ap = alpha * PI;
    -u.ln() * (ap.sin() / (ap * v).tan() - ap.cos()).powf(1.0 / alpha)
}

/// D_U through the subordinator sampler against U^{1/α}·D₁, plus a
/// trigonometric Mittag-Leffler sampler that shares no code with either.
pub fn ml_renewal(cfg: &ExperimentConfig, rng: &RngStream) -> Result<Outcome> {
    let alpha = cfg.alpha_or(0.5);
    let n = cfg.samples_or(100_000);
    let p_min = cfg.tolerance_or(0.01);
    let u_spec = cfg.waiting_or(exp1());
    let psi = BernsteinSymbol::stable(alpha, 1.0)?;
    let mapped = draws(&rng.child(0), n, |r| sample_phi_mapped(&u_spec, &psi, r))?;
    let product = draws(&rng.child(1), n, |r| Ok(u_spec.sample(r)?.powf(1.0 / alpha) * sample_positive_stable(alpha, 1.0, r)))?;
    let mut out = Outcome::default();
    let ks = ks_two_sample(&mapped, &product)?;
    out.reports.push(named(ks, "ks phi_mapped vs U^(1/alpha) D_1".into(), "same law".into(), p_min));
    if matches!(u_spec, DistributionSpec::Exponential { rate } if rate == 1.0) {
        let direct = draws(&rng.child(2), n, |r| Ok(mittag_leffler_direct(alpha, r)))?;
        let ks = ks_two_sample(&mapped, &direct)?;
        out.reports.push(named(ks, "ks phi_mapped vs trigonometric Mittag-Leffler".into(), "LT 1/(1+s^alpha)".into(), p_min));
    }
    let probs = percent_grid();
    let (qa, qb) = (quantiles(&mapped, &probs), quantiles(&product, &probs));
    let mut table = Table::new("quantiles", &["p", "phi_mapped", "product"]);
    for k in 0..probs.len() {
        table.push(vec![probs[k], qa[k], qb[k]]);
    }
    out.tables.push(table);
    out.summary = json!({ "alpha": alpha, "samples": n });
    Ok(out)
}

/// E^n(t) for the scaled pair built from Pareto waits and ψ_m, against the
/// inverse-stable law P(E_t ≤ x) = P(D_x ≥ t) with D of symbol s^α/μ₁.
pub fn en_convergence(cfg: &ExperimentConfig, rng: &RngStream) -> Result<Outcome> {
    let alpha = cfg.alpha_or(0.5);
    let m = cfg.truncation_or(10.0);
    let n = cfg.n_or(10_000);
    let samples = cfg.samples_or(10_000);
    let dt = cfg.dt_or(1e-3);
    let t = cfg.horizon_or(1.0);
    let p_min = cfg.tolerance_or(0.01);
    let w = DistributionSpec::pareto_canonical(alpha);
    let (psi, mu1) = build_truncation_symbol(&w, m, TruncationForm::Stable { alpha })?;
    let pair = scaled_ctrw_pair(DistributionSpec::truncated(w, m), psi, SpatialLaw::Lattice { dim: 1, step: 1.0 }, n)?;
    let es = draws(rng, samples, |r| pair.e_at(t, dt, r))?;
    let cdf = |x: f64| if x <= 0.0 { 0.0 } else { stable_std_tail(alpha, t * (x / mu1).powf(-1.0 / alpha)) };
    let mut out = Outcome::default();
    let ks = ks_one_sample(&es, cdf)?;
    out.reports.push(named(ks, format!("ks E^n({t}) vs inverse stable"), format!("P(D_x >= {t}), D ~ s^alpha/mu1"), p_min));
    let probs = percent_grid();
    let q = quantiles(&es, &probs);
    let mut table = Table::new("ecdf", &["p", "e_quantile", "reference_cdf"]);
    for k in 0..probs.len() {
        table.push(vec![probs[k], q[k], cdf(q[k])]);
    }
    out.tables.push(table);
    out.summary = json!({ "alpha": alpha, "m": m, "mu1": mu1, "n": n, "a_n": pair.a_n, "dt": dt, "t": t });
    Ok(out)
}

/// Var(a_n T_n) and the density event A^n_{δ,T} for renewal epochs, plus the
/// relative size of the residual lifetime.
pub fn relative_stability(cfg: &ExperimentConfig, rng: &RngStream) -> Result<Outcome> {
    let u_spec = cfg.waiting_or(exp1());
    let n_grid = cfg.n_grid_or(&[10_000, 100_000]);
    let var_reps = cfg.reps_or(200);
    let event_reps = cfg.samples_or(2000);
    let delta = cfg.delta_or(0.05);
    let horizon = cfg.horizon_or(1.0);
    let mut out = Outcome::default();
    let mut table = Table::new("relative_stability", &["n", "a_n", "mean_a_n_t_n", "var_a_n_t_n", "p_a_delta"]);
    for (k, &n) in n_grid.iter().enumerate() {
        let a_n = compute_a_n(&u_spec.laplace(), n)?.a_n;
        let base = rng.child(k as u64);
        let ts = replicate(&base.child(0), var_reps, |_, r| scaled_renewal_time(&u_spec, a_n, n, r))?;
        let mean = ts.iter().sum::<f64>() / var_reps as f64;
        let var = ts.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (var_reps as f64 - 1.0);
        let hits = replicate(&base.child(1), event_reps, |_, r| Ok(check_a_delta(&renewal_epochs(&u_spec, a_n, horizon, r)?, delta)))?;
        let p = hits.iter().filter(|&&h| h).count() as f64 / event_reps as f64;
        table.push(vec![n as f64, a_n, mean, var, p]);
        out.reports.push(below(&format!("var(a_n T_n) n={n}"), var, 1e-3));
        out.reports.push(below(&format!("1 - P(A_delta) n={n} delta={delta}"), 1.0 - p, 0.01));
    }
    let t_res = 1e4;
    let z = replicate(&rng.child(u64::MAX), event_reps, |_, r| Ok(residual_lifetime(&u_spec, t_res, r)? / t_res))?;
    let q95 = quantiles(&z, &[0.95])[0];
    out.reports.push(below(&format!("q95 Z_t/t t={t_res}"), q95, delta));
    out.tables.push(table);
    out.summary = json!({ "delta": delta, "horizon": horizon, "var_reps": var_reps, "event_reps": event_reps, "q95_residual_ratio": q95 });
    Ok(out)
}

/// Y^n(t) of the general scheme with Brownian space and stable time drivers
/// against A(E_t) sampled directly.
pub fn general_scheme(cfg: &ExperimentConfig, rng: &RngStream) -> Result<Outcome> {
    let alpha = cfg.alpha_or(0.6);
    let n = cfg.n_or(1000);
    let samples = cfg.samples_or(10_000);
    let t = cfg.horizon_or(1.0);
    let p_min = cfg.tolerance_or(0.01);
    let u_spec = cfg.waiting_or(exp1());
    let a = DriverProcess::Brownian { sigma: 1.0 };
    let d = DriverProcess::Stable { alpha, scale: 1.0 };
    let scheme = draws(&rng.child(0), samples, |r| Ok(general_scheme_ctrw(&a, &d, &u_spec, 1.0 / n as f64, t, r)?.eval1(t)))?;
    let reference = draws(&rng.child(1), samples, |r| general_scheme_reference(&a, &d, t, r))?;
    let mut out = Outcome::default();
    let ks = ks_two_sample(&scheme, &reference)?;
    out.reports.push(named(ks, format!("ks general scheme Y^n({t}) vs A(E_t)"), "same law".into(), p_min));
    let probs = percent_grid();
    let (qa, qb) = (quantiles(&scheme, &probs), quantiles(&reference, &probs));
    let mut table = Table::new("quantiles", &["p", "scheme", "reference"]);
    for k in 0..probs.len() {
        table.push(vec![probs[k], qa[k], qb[k]]);
    }
    out.tables.push(table);
    out.summary = json!({ "alpha": alpha, "n": n, "samples": samples, "t": t });
    Ok(out)
}
