//! Distribution descriptors: tails, Laplace transforms, moments and sampling.

use crate::error::{Error, Result};
use crate::quad::{self, Tolerance};
use crate::rng::RngStream;
use crate::samplers;
use crate::special::{gamma, gamma_q};
use crate::symbol::{BernsteinSymbol, LevyMeasure};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
type FallibleFn = Arc<dyn Fn(f64) -> Result<f64> + Send + Sync>;

/// Known asymptotics of a tail: P(X > t) ≈ c t^{-alpha} + O(t^{-beta}).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailAsymptotic {
    pub c: f64,
    pub alpha: f64,
    pub beta: f64,
}

/// t ↦ P(X > t) on t ≥ 0.
#[derive(Clone)]
pub struct TailFunction {
    eval: ScalarFn,
    asymptotic: Option<TailAsymptotic>,
}

impl TailFunction {
    pub fn new<F: Fn(f64) -> f64 + Send + Sync + 'static>(f: F, asymptotic: Option<TailAsymptotic>) -> Self {
        TailFunction { eval: Arc::new(f), asymptotic }
    }

    pub fn eval(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 1.0;
        }
        (self.eval)(t)
    }

    pub fn asymptotic(&self) -> Option<TailAsymptotic> {
        self.asymptotic
    }

    /// Discrepancy from the leading power law, the `g` of the coupling lemma.
    pub fn residual(&self, t: f64) -> Option<f64> {
        self.asymptotic.map(|a| self.eval(t) - a.c * t.powf(-a.alpha))
    }
}

impl fmt::Debug for TailFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TailFunction").field("asymptotic", &self.asymptotic).finish_non_exhaustive()
    }
}

/// A Laplace transform s ↦ E e^{-sX} carried together with its complement
/// 1 - E e^{-sX}, which is what root-finding near s = 0 needs.
#[derive(Clone)]
pub struct Laplace {
    value: FallibleFn,
    complement: FallibleFn,
}

impl Laplace {
    pub fn new<V, C>(value: V, complement: C) -> Self
    where
        V: Fn(f64) -> Result<f64> + Send + Sync + 'static,
        C: Fn(f64) -> Result<f64> + Send + Sync + 'static,
    {
        Laplace { value: Arc::new(value), complement: Arc::new(complement) }
    }

    pub fn from_value<V: Fn(f64) -> f64 + Send + Sync + 'static>(v: V) -> Self {
        let v = Arc::new(v);
        let v2 = v.clone();
        Laplace::new(move |s| Ok(v(s)), move |s| Ok(1.0 - v2(s)))
    }

    pub fn eval(&self, s: f64) -> Result<f64> {
        (self.value)(s)
    }

    pub fn complement(&self, s: f64) -> Result<f64> {
        (self.complement)(s)
    }
}

impl fmt::Debug for Laplace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Laplace(..)")
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DistributionSpec {
    /// P(X > t) = (x_m / t)^alpha for t ≥ x_m.
    Pareto { alpha: f64, x_m: f64 },
    /// E e^{-sX} = exp(-t s^alpha).
    PositiveStable { alpha: f64, t: f64 },
    Exponential { rate: f64 },
    /// P(X > x) = exp(-(x/scale)^shape).
    Weibull { shape: f64, scale: f64 },
    PointMass { at: f64 },
    /// X·1{X ≤ m}; the excess mass sits at 0.
    Truncated { base: Box<DistributionSpec>, m: f64 },
    Scaled { base: Box<DistributionSpec>, factor: f64 },
    /// D_U with D a subordinator of symbol psi, independent of U ~ base.
    PhiMapped { base: Box<DistributionSpec>, psi: Box<BernsteinSymbol> },
    #[serde(skip)]
    Generic { tail: TailFunction },
}

fn tight() -> Tolerance {
    Tolerance::new(1e-15, 1e-12)
}

impl DistributionSpec {
    /// Pareto law whose tail is exactly t^{-alpha}/Γ(1-alpha) above its support start.
    pub fn pareto_canonical(alpha: f64) -> Self {
        DistributionSpec::Pareto { alpha, x_m: gamma(1.0 - alpha).powf(-1.0 / alpha) }
    }

    pub fn truncated(base: DistributionSpec, m: f64) -> Self {
        DistributionSpec::Truncated { base: Box::new(base), m }
    }

    pub fn scaled(base: DistributionSpec, factor: f64) -> Self {
        DistributionSpec::Scaled { base: Box::new(base), factor }
    }

    pub fn phi_mapped(base: DistributionSpec, psi: BernsteinSymbol) -> Self {
        DistributionSpec::PhiMapped { base: Box::new(base), psi: Box::new(psi) }
    }

    pub fn validate(&self) -> Result<()> {
        use DistributionSpec::*;
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        match self {
            Pareto { alpha, x_m } => {
                if !(*alpha > 0.0 && *x_m > 0.0) {
                    return bad("pareto needs alpha > 0, x_m > 0");
                }
            }
            PositiveStable { alpha, t } => {
                if !(*alpha > 0.0 && *alpha < 1.0 && *t > 0.0) {
                    return bad("stable needs 0 < alpha < 1, t > 0");
                }
            }
            Exponential { rate } => {
                if !(*rate > 0.0) {
                    return bad("exponential rate must be positive");
                }
            }
            Weibull { shape, scale } => {
                if !(*shape > 0.0 && *scale > 0.0) {
                    return bad("weibull needs positive shape and scale");
                }
            }
            PointMass { at } => {
                if !(*at >= 0.0) {
                    return bad("point mass must sit on [0, inf)");
                }
            }
            Truncated { base, m } => {
                base.validate()?;
                if !(*m > 0.0) {
                    return bad("truncation level must be positive");
                }
                let kept = base.tail(0.0)? - base.tail(*m)?;
                if !(kept > 0.0) {
                    return bad("truncated base has no mass on (0, m]");
                }
            }
            Scaled { base, factor } => {
                base.validate()?;
                if !(*factor > 0.0) {
                    return bad("scale factor must be positive");
                }
            }
            PhiMapped { base, .. } => base.validate()?,
            Generic { .. } => {}
        }
        Ok(())
    }

    /// P(X > x).
    pub fn tail(&self, x: f64) -> Result<f64> {
        use DistributionSpec::*;
        if x < 0.0 {
            return Ok(1.0);
        }
        Ok(match self {
            Pareto { alpha, x_m } => {
                if x < *x_m {
                    1.0
                } else {
                    (x_m / x).powf(*alpha)
                }
            }
            PositiveStable { alpha, t } => samplers::stable_std_tail(*alpha, x * t.powf(-1.0 / alpha)),
            Exponential { rate } => (-rate * x).exp(),
            Weibull { shape, scale } => (-(x / scale).powf(*shape)).exp(),
            PointMass { at } => {
                if *at > x {
                    1.0
                } else {
                    0.0
                }
            }
            Truncated { base, m } => {
                if x >= *m {
                    0.0
                } else {
                    (base.tail(x)? - base.tail(*m)?).max(0.0)
                }
            }
            Scaled { base, factor } => base.tail(x / factor)?,
            PhiMapped { base, psi } => phi_mapped_tail(base, psi, x)?,
            Generic { tail } => tail.eval(x),
        })
    }

    pub fn tail_function(&self) -> Result<TailFunction> {
        use DistributionSpec::*;
        self.tail(1.0)?;
        let asym = match self {
            Pareto { alpha, x_m } => Some(TailAsymptotic { c: x_m.powf(*alpha), alpha: *alpha, beta: f64::INFINITY }),
            PositiveStable { alpha, t } => Some(TailAsymptotic { c: t / gamma(1.0 - alpha), alpha: *alpha, beta: 2.0 * alpha }),
            PhiMapped { base, psi } => match psi.measure() {
                Some(LevyMeasure::StablePower { alpha, scale }) => {
                    let mean = base.mean()?;
                    mean.is_finite().then(|| TailAsymptotic { c: mean * scale / gamma(1.0 - alpha), alpha: *alpha, beta: 2.0 * alpha })
                }
                _ => None,
            },
            Generic { tail } => tail.asymptotic(),
            _ => None,
        };
        let me = self.clone();
        Ok(TailFunction::new(move |t| me.tail(t).unwrap_or(f64::NAN), asym))
    }

    /// Points where the tail is not smooth.
    fn tail_breaks(&self) -> Vec<f64> {
        use DistributionSpec::*;
        match self {
            Pareto { x_m, .. } => vec![*x_m],
            PointMass { at } => vec![*at],
            Truncated { base, m } => {
                let mut v = base.tail_breaks();
                v.push(*m);
                v
            }
            Scaled { base, factor } => base.tail_breaks().into_iter().map(|b| b * factor).collect(),
            _ => vec![],
        }
    }

    /// Points v in (0,1) where the upper quantile is not smooth.
    pub(crate) fn quantile_breaks(&self) -> Result<Vec<f64>> {
        use DistributionSpec::*;
        Ok(match self {
            Truncated { base, m } => {
                let gm = base.tail(*m)?;
                let mut v: Vec<f64> = base.quantile_breaks()?.into_iter().map(|b| b - gm).filter(|&b| b > 0.0).collect();
                v.push(base.tail(0.0)? - gm);
                v
            }
            Scaled { base, .. } => base.quantile_breaks()?,
            _ => vec![],
        })
    }

    /// inf{x ≥ 0 : P(X > x) ≤ v} for v in (0, 1).
    pub fn upper_quantile(&self, v: f64) -> Result<f64> {
        use DistributionSpec::*;
        if !(v > 0.0 && v < 1.0) {
            if v >= 1.0 {
                return Ok(0.0);
            }
            return Err(Error::InvalidParameter(format!("quantile level {v} outside (0,1)")));
        }
        match self {
            Pareto { alpha, x_m } => Ok(samplers::pareto_from_uniform(*alpha, *x_m, v)),
            Exponential { rate } => Ok(-v.ln() / rate),
            Weibull { shape, scale } => Ok(scale * (-v.ln()).powf(1.0 / shape)),
            PointMass { at } => Ok(*at),
            Truncated { base, m } => {
                let gm = base.tail(*m)?;
                if base.tail(0.0)? - gm <= v {
                    Ok(0.0)
                } else {
                    Ok(base.upper_quantile(v + gm)?.min(*m))
                }
            }
            Scaled { base, factor } => Ok(factor * base.upper_quantile(v)?),
            _ => invert_tail(|x| self.tail(x), v),
        }
    }

    /// 1 - E e^{-sX}.
    pub fn lt_complement(&self, s: f64) -> Result<f64> {
        use DistributionSpec::*;
        if s < 0.0 || s.is_nan() {
            return Err(Error::InvalidParameter(format!("Laplace argument {s}")));
        }
        if s == 0.0 {
            return Ok(0.0);
        }
        Ok(match self {
            Pareto { alpha, x_m } => pareto_lt_complement(*alpha, *x_m, s, f64::INFINITY),
            PositiveStable { alpha, t } => -(-t * s.powf(*alpha)).exp_m1(),
            Exponential { rate } => s / (rate + s),
            PointMass { at } => -(-s * at).exp_m1(),
            Truncated { base, m } => match base.as_ref() {
                Pareto { alpha, x_m } => pareto_lt_complement(*alpha, *x_m, s, *m),
                _ => {
                    // E[(1 - e^{-sX}); X ≤ m] = ∫_0^m s e^{-sy} G(y) dy - (1 - e^{-sm}) G(m)
                    let gm = base.tail(*m)?;
                    let breaks = base.tail_breaks();
                    let v = quad::integrate_fallible(
                        |y| base.tail(y).map(|g| s * (-s * y).exp() * g),
                        0.0,
                        *m,
                        &breaks,
                        tight(),
                    )?;
                    v + (-s * m).exp_m1() * gm
                }
            },
            Scaled { base, factor } => base.lt_complement(factor * s)?,
            PhiMapped { base, psi } => base.lt_complement(psi.eval(s)?)?,
            Weibull { .. } => quad::integrate_to_inf(|z| (-z).exp() * self.tail(z / s).unwrap_or(0.0), 0.0, tight())?,
            Generic { tail } => quad::integrate_to_inf(|z| (-z).exp() * tail.eval(z / s), 0.0, tight())?,
        })
    }

    /// E e^{-sX}.
    pub fn lt(&self, s: f64) -> Result<f64> {
        use DistributionSpec::*;
        match self {
            PositiveStable { alpha, t } => Ok((-t * s.powf(*alpha)).exp()),
            Exponential { rate } => Ok(rate / (rate + s)),
            PointMass { at } => Ok((-s * at).exp()),
            Scaled { base, factor } => base.lt(factor * s),
            PhiMapped { base, psi } => base.lt(psi.eval(s)?),
            _ => Ok(1.0 - self.lt_complement(s)?),
        }
    }

    pub fn laplace(&self) -> Laplace {
        let a = self.clone();
        let b = self.clone();
        Laplace::new(move |s| a.lt(s), move |s| b.lt_complement(s))
    }

    pub fn mean(&self) -> Result<f64> {
        use DistributionSpec::*;
        Ok(match self {
            Pareto { alpha, x_m } => {
                if *alpha <= 1.0 {
                    f64::INFINITY
                } else {
                    alpha * x_m / (alpha - 1.0)
                }
            }
            PositiveStable { .. } => f64::INFINITY,
            Exponential { rate } => 1.0 / rate,
            Weibull { shape, scale } => scale * gamma(1.0 + 1.0 / shape),
            PointMass { at } => *at,
            Truncated { base, m } => base.truncated_mean(*m)?,
            Scaled { base, factor } => factor * base.mean()?,
            PhiMapped { base, psi } => {
                let mu = base.mean()?;
                let rate = psi.drift() + psi.measure().map_or(Ok(0.0), |m| m.first_moment())?;
                if mu == 0.0 {
                    0.0
                } else {
                    mu * rate
                }
            }
            Generic { tail } => quad::integrate_to_inf(|t| tail.eval(t), 0.0, tight())?,
        })
    }

    /// E[X·1{X ≤ m}] = ∫_0^m (G(t) - G(m)) dt.
    pub fn truncated_mean(&self, m: f64) -> Result<f64> {
        use DistributionSpec::*;
        Ok(match self {
            Pareto { alpha, x_m } => {
                if m <= *x_m {
                    0.0
                } else {
                    self.integrated_tail(m)? - m * (x_m / m).powf(*alpha)
                }
            }
            Exponential { rate } => -(-rate * m).exp_m1() / rate - m * (-rate * m).exp(),
            PointMass { at } => {
                if *at <= m {
                    *at
                } else {
                    0.0
                }
            }
            Scaled { base, factor } => factor * base.truncated_mean(m / factor)?,
            _ => {
                let gm = self.tail(m)?;
                quad::integrate_fallible(
                    |t| self.tail(t).map(|g| g - gm),
                    0.0,
                    m,
                    &self.tail_breaks(),
                    tight(),
                )?
            }
        })
    }

    /// ∫_0^s P(X > y) dy.
    pub fn integrated_tail(&self, s: f64) -> Result<f64> {
        use DistributionSpec::*;
        Ok(match self {
            Pareto { alpha, x_m } => {
                if s <= *x_m {
                    s
                } else if (*alpha - 1.0).abs() < 1e-15 {
                    x_m + x_m * (s / x_m).ln()
                } else {
                    let c = x_m.powf(*alpha);
                    x_m + c * (s.powf(1.0 - alpha) - x_m.powf(1.0 - alpha)) / (1.0 - alpha)
                }
            }
            Exponential { rate } => -(-rate * s).exp_m1() / rate,
            PointMass { at } => s.min(*at),
            Scaled { base, factor } => factor * base.integrated_tail(s / factor)?,
            _ => {
                quad::integrate_fallible(
                    |t| self.tail(t),
                    0.0,
                    s,
                    &self.tail_breaks(),
                    tight(),
                )?
            }
        })
    }

    pub fn sample(&self, rng: &mut RngStream) -> Result<f64> {
        use DistributionSpec::*;
        Ok(match self {
            Pareto { alpha, x_m } => samplers::pareto_from_uniform(*alpha, *x_m, rng.open01()),
            PositiveStable { alpha, t } => samplers::sample_positive_stable(*alpha, *t, rng),
            Exponential { rate } => -rng.open01().ln() / rate,
            Weibull { shape, scale } => scale * (-rng.open01().ln()).powf(1.0 / shape),
            PointMass { at } => *at,
            Truncated { base, m } => {
                let w = base.sample(rng)?;
                if w <= *m {
                    w
                } else {
                    0.0
                }
            }
            Scaled { base, factor } => factor * base.sample(rng)?,
            PhiMapped { base, psi } => samplers::sample_phi_mapped(base, psi, rng)?,
            Generic { .. } => self.upper_quantile(rng.open01())?,
        })
    }
}

/// 1 - E e^{-sX} restricted to X ≤ m, for Pareto(alpha, x_m); m may be infinite.
fn pareto_lt_complement(alpha: f64, x_m: f64, s: f64, m: f64) -> f64 {
    if m <= x_m {
        return 0.0;
    }
    let c = x_m.powf(alpha);
    let head = -(-s * x_m).exp_m1();
    let a = 1.0 - alpha;
    if m.is_infinite() {
        return head + c * gamma(a) * s.powf(alpha) * gamma_q(a, s * x_m);
    }
    let gm = c * m.powf(-alpha);
    head + c * gamma(a) * s.powf(alpha) * (gamma_q(a, s * x_m) - gamma_q(a, s * m)) + (-s * m).exp_m1() * gm
}

/// P(D_U > x) for psi = drift + (optional) stable part, by integrating over
/// the upper quantile of U.
fn phi_mapped_tail(base: &DistributionSpec, psi: &BernsteinSymbol, x: f64) -> Result<f64> {
    let b = psi.drift();
    let stable = match psi.measure() {
        None => None,
        Some(LevyMeasure::StablePower { alpha, scale }) => Some((*alpha, *scale)),
        Some(_) => return Err(Error::UnsupportedSymbol("tail of Phi-image needs drift + stable symbol".into())),
    };
    let h = |u: f64| -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        let r = x - b * u;
        match stable {
            None => {
                if r < 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Some((alpha, scale)) => {
                if r <= 0.0 {
                    1.0
                } else {
                    samplers::stable_std_tail(alpha, r * (scale * u).powf(-1.0 / alpha))
                }
            }
        }
    };
    let mut breaks = base.quantile_breaks()?;
    if b > 0.0 {
        let v = base.tail(x / b)?;
        if v > 0.0 && v < 1.0 {
            breaks.push(v);
        }
    }
    let v = quad::integrate_fallible(
        |v| base.upper_quantile(v).map(h),
        0.0,
        1.0,
        &breaks,
        tight(),
    )?;
    Ok(v.clamp(0.0, 1.0))
}

fn invert_tail<F: Fn(f64) -> Result<f64>>(tail: F, v: f64) -> Result<f64> {
    if tail(0.0)? <= v {
        return Ok(0.0);
    }
    let mut hi = 1.0;
    let mut n = 0;
    while tail(hi)? > v {
        hi *= 2.0;
        n += 1;
        if n > 2000 {
            return Err(Error::RootNotBracketed { lo: 0.0, hi });
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if tail(mid)? > v {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    Ok(hi)
}
