//! Exact samplers. Stable laws use the convention E e^{-sX} = e^{-t s^α}.

use crate::dist::DistributionSpec;
use crate::error::{Error, Result};
use crate::quad::{self, Tolerance};
use crate::rng::RngStream;
use crate::special::{gamma, ln_gamma};
use crate::symbol::{BernsteinSymbol, LevyMeasure};
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use std::f64::consts::PI;

/// ln A(φ) for Zolotarev's function
/// A(φ) = sin(αφ)^{α/(1-α)} sin((1-α)φ) / sin(φ)^{1/(1-α)}.
fn ln_zolotarev(alpha: f64, phi: f64) -> f64 {
    let b = 1.0 - alpha;
    alpha / b * (alpha * phi).sin().ln() + (b * phi).sin().ln() - (phi.sin()).ln() / b
}

/// Kanter's representation: X = t^{1/α} (A(U)/E)^{(1-α)/α}.
pub fn sample_positive_stable(alpha: f64, t: f64, rng: &mut RngStream) -> f64 {
    let phi = PI * rng.open01();
    let e = -rng.open01().ln();
    let ln_s = (1.0 - alpha) / alpha * (ln_zolotarev(alpha, phi) - e.ln());
    (ln_s + t.ln() / alpha).exp()
}

/// P(X > x) for the unit-time stable law: the convergent series in x^{-α}
/// far out in the tail, quadrature over Kanter's angle elsewhere. α = 1/2 is
/// the Lévy law, P(X > x) = erf(1/(2√x)).
pub fn stable_std_tail(alpha: f64, x: f64) -> f64 {
    if alpha == 0.5 && x > 0.0 {
        return libm::erf(0.5 / x.sqrt());
    }
    if x > 0.0 && x.is_finite() {
        let z = x.powf(-alpha);
        if z < 0.25 {
            if let Ok(v) = stable_tail_series(alpha, 1.0, x, 1e-15 * z) {
                return v.clamp(0.0, 1.0);
            }
        }
    }
    stable_std_tail_quad(alpha, x)
}

fn stable_std_tail_quad(alpha: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x.is_infinite() {
        return 0.0;
    }
    let ln_z = -alpha / (1.0 - alpha) * x.ln();
    let f = |phi: f64| {
        if phi <= 0.0 || phi >= PI {
            return if phi >= PI { 1.0 } else { -(-(ln_zolotarev(alpha, 1e-300_f64.max(phi)) + ln_z).exp()).exp_m1() };
        }
        let a = (ln_zolotarev(alpha, phi) + ln_z).exp();
        -(-a).exp_m1()
    };
    let r = quad::integrate(f, 0.0, PI, Tolerance::new(1e-15, 1e-12))
        .or_else(|_| quad::integrate(f, 0.0, PI, Tolerance::new(1e-13, 1e-9)));
    match r {
        Ok(v) => (v / PI).clamp(0.0, 1.0),
        Err(Error::QuadratureFailure { estimate, .. }) => (estimate / PI).clamp(0.0, 1.0),
        Err(_) => f64::NAN,
    }
}

pub fn stable_std_cdf(alpha: f64, x: f64) -> f64 {
    1.0 - stable_std_tail(alpha, x)
}

/// P(D_t > x) = Σ_{n≥1} (-1)^{n-1} z^n / (Γ(1-αn) n!), z = t x^{-α}.
pub fn stable_tail_series(alpha: f64, t: f64, x: f64, tol: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0 && t > 0.0 && x > 0.0 && tol > 0.0) {
        return Err(Error::InvalidParameter("stable_tail_series arguments".into()));
    }
    let z = t * x.powf(-alpha);
    let ln_z = z.ln();
    let mut sum = 0.0;
    let mut max_env = 0.0_f64;
    let mut small_run = 0;
    for n in 1..=1000usize {
        let nf = n as f64;
        let env = (nf * ln_z + ln_gamma(alpha * nf) - ln_gamma(nf + 1.0)).exp() / PI;
        max_env = max_env.max(env);
        let an = alpha * nf;
        // 1/Γ(1-αn) vanishes when αn is a positive integer
        if (an - an.round()).abs() > 1e-12 {
            let sgn = if n % 2 == 1 { 1.0 } else { -1.0 };
            sum += sgn * env * (PI * an).sin();
        }
        if max_env * f64::EPSILON * nf > tol {
            return Err(Error::SeriesDivergence { z });
        }
        if env < tol / 10.0 {
            small_run += 1;
            if small_run >= 2 {
                return Ok(sum);
            }
        } else {
            small_run = 0;
        }
    }
    Err(Error::SeriesDivergence { z })
}

/// Inverse-CDF Pareto: x_m u^{-1/α}.
pub fn pareto_from_uniform(alpha: f64, x_m: f64, u: f64) -> f64 {
    x_m * u.powf(-1.0 / alpha)
}

/// Pareto with tail t^{-α}/Γ(1-α) above x_m = Γ(1-α)^{-1/α}.
pub fn sample_pareto(alpha: f64, rng: &mut RngStream) -> f64 {
    pareto_from_uniform(alpha, gamma(1.0 - alpha).powf(-1.0 / alpha), rng.open01())
}

fn poisson(lambda: f64, rng: &mut RngStream) -> u64 {
    if lambda <= 0.0 {
        return 0;
    }
    Poisson::new(lambda).map(|p| p.sample(rng) as u64).unwrap_or(0)
}

/// D_dt for the subordinator with symbol ψ.
pub fn sample_subordinator_increment(psi: &BernsteinSymbol, dt: f64, rng: &mut RngStream) -> Result<f64> {
    if !(dt >= 0.0) {
        return Err(Error::InvalidParameter("dt must be non-negative".into()));
    }
    let mut x = psi.drift() * dt;
    if dt == 0.0 {
        return Ok(0.0);
    }
    match psi.measure() {
        None => {}
        Some(LevyMeasure::StablePower { alpha, scale }) => x += sample_positive_stable(*alpha, scale * dt, rng),
        Some(LevyMeasure::ScaledDistribution { base, rate }) => {
            for _ in 0..poisson(rate * dt, rng) {
                x += base.sample(rng)?;
            }
        }
        Some(LevyMeasure::Atomic { atoms }) => {
            let total: f64 = atoms.iter().map(|a| a.1).sum();
            for _ in 0..poisson(total * dt, rng) {
                let mut v = rng.random::<f64>() * total;
                let mut pick = atoms[atoms.len() - 1].0;
                for &(l, m) in atoms {
                    if v < m {
                        pick = l;
                        break;
                    }
                    v -= m;
                }
                x += pick;
            }
        }
    }
    Ok(x)
}

/// Φ_ψ(U) sampled as D_U with D independent of U.
pub fn sample_phi_mapped(u_spec: &DistributionSpec, psi: &BernsteinSymbol, rng: &mut RngStream) -> Result<f64> {
    let u = u_spec.sample(rng)?;
    if u == 0.0 {
        return Ok(0.0);
    }
    sample_subordinator_increment(psi, u, rng)
}

/// Waiting time with LT λ/(λ + s^α).
pub fn sample_mittag_leffler_wait(alpha: f64, lambda: f64, rng: &mut RngStream) -> Result<f64> {
    let u = -rng.open01().ln() / lambda;
    Ok(sample_positive_stable(alpha, u, rng))
}
