//! Two-sample tests and log-log fits used by the experiments.

use crate::error::{Error, Result};
use crate::rng::RngStream;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatReport {
    pub name: String,
    pub value: f64,
    pub reference: String,
    /// p-value when `is_p_value`, otherwise a z-score
    pub score: f64,
    pub is_p_value: bool,
    pub threshold: f64,
    pub pass: bool,
}

impl StatReport {
    /// p-value reports pass when p > threshold; z reports when |z| < threshold.
    pub fn new(name: impl Into<String>, value: f64, reference: impl Into<String>, score: f64, is_p_value: bool, threshold: f64) -> Self {
        let pass = if is_p_value { score > threshold } else { score.abs() < threshold };
        StatReport { name: name.into(), value, reference: reference.into(), score, is_p_value, threshold, pass }
    }

    pub fn recompute_pass(&self) -> bool {
        if self.is_p_value {
            self.score > self.threshold
        } else {
            self.score.abs() < self.threshold
        }
    }
}

/// Kolmogorov survival function Q(λ) = 2 Σ (-1)^{k-1} exp(-2k²λ²).
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    if lambda < 1.18 {
        // small λ: theta-function form converges faster
        let y = (-std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda)).exp();
        let c = (2.0 * std::f64::consts::PI).sqrt() / lambda;
        let s = y + y.powi(9) + y.powi(25) + y.powi(49);
        return (1.0 - c * s).clamp(0.0, 1.0);
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

fn sorted(xs: &[f64]) -> Result<Vec<f64>> {
    if xs.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// sup |F_a - F_b| and the asymptotic p-value with the Stephens correction.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    let (a, b) = (sorted(a)?, sorted(b)?);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0_f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    let ne = (n * m / (n + m)).sqrt();
    Ok((d, kolmogorov_q((ne + 0.12 + 0.11 / ne) * d)))
}

pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<StatReport> {
    let (d, p) = ks_statistic(a, b)?;
    Ok(StatReport::new("ks_two_sample", d, "two-sample", p, true, 0.01))
}

/// One-sample KS against a continuous CDF.
pub fn ks_one_sample<F: Fn(f64) -> f64>(a: &[f64], cdf: F) -> Result<StatReport> {
    let a = sorted(a)?;
    let n = a.len() as f64;
    let mut d = 0.0_f64;
    for (i, &x) in a.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    let ne = n.sqrt();
    let p = kolmogorov_q((ne + 0.12 + 0.11 / ne) * d);
    Ok(StatReport::new("ks_one_sample", d, "reference cdf", p, true, 0.01))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub intercept: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

fn ols(lx: &[f64], ly: &[f64], idx: impl Iterator<Item = usize> + Clone) -> Option<(f64, f64)> {
    let n = idx.clone().count() as f64;
    let mx = idx.clone().map(|i| lx[i]).sum::<f64>() / n;
    let my = idx.clone().map(|i| ly[i]).sum::<f64>() / n;
    let sxx: f64 = idx.clone().map(|i| (lx[i] - mx).powi(2)).sum();
    let sxy: f64 = idx.map(|i| (lx[i] - mx) * (ly[i] - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// log y = intercept + exponent·log x by least squares; 95% percentile
/// bootstrap interval over 1000 case resamples.
pub fn fit_power_law(xs: &[f64], ys: &[f64], rng: &mut RngStream) -> Result<PowerLawFit> {
    if xs.len() != ys.len() || xs.len() < 4 {
        return Err(Error::InvalidParameter("need at least four paired points".into()));
    }
    if xs.iter().chain(ys).any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::NonPositiveData);
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let k = xs.len();
    let (exponent, intercept) = ols(&lx, &ly, 0..k).ok_or_else(|| Error::InvalidParameter("x values are all equal".into()))?;
    let mut slopes = Vec::with_capacity(1000);
    let mut idx = vec![0usize; k];
    for _ in 0..1000 {
        for v in idx.iter_mut() {
            *v = rng.random_range(0..k);
        }
        if let Some((s, _)) = ols(&lx, &ly, idx.iter().copied()) {
            slopes.push(s);
        }
    }
    slopes.sort_by(f64::total_cmp);
    let q = |p: f64| slopes[((slopes.len() - 1) as f64 * p).round() as usize];
    let (lo, hi) = if slopes.is_empty() { (exponent, exponent) } else { (q(0.025).min(exponent), q(0.975).max(exponent)) };
    Ok(PowerLawFit { exponent, intercept, ci_low: lo, ci_high: hi })
}
