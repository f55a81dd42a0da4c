//! Bernstein symbols ψ(s) = b·s + ∫(1 - e^{-sy}) μ(dy) and the maps built on them.

use crate::dist::{DistributionSpec, Laplace};
use crate::error::{Error, Result};
use crate::special::{gamma, rgamma};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LevyMeasure {
    /// (scale·α/Γ(1-α)) y^{-α-1} dy, so that the symbol part is scale·s^α.
    StablePower { alpha: f64, scale: f64 },
    /// rate·f(dy) for a probability law f.
    ScaledDistribution { base: DistributionSpec, rate: f64 },
    /// Σ mass·δ_location.
    Atomic { atoms: Vec<(f64, f64)> },
}

impl LevyMeasure {
    pub fn validate(&self) -> Result<()> {
        match self {
            LevyMeasure::StablePower { alpha, scale } => {
                if !(*alpha > 0.0 && *alpha < 1.0) {
                    return Err(Error::NonIntegrableMeasure);
                }
                if !(*scale > 0.0 && scale.is_finite()) {
                    return Err(Error::InvalidParameter("stable scale must be positive".into()));
                }
            }
            LevyMeasure::ScaledDistribution { base, rate } => {
                base.validate()?;
                if !(*rate > 0.0 && rate.is_finite()) {
                    return Err(Error::InvalidParameter("measure rate must be positive".into()));
                }
            }
            LevyMeasure::Atomic { atoms } => {
                for &(loc, mass) in atoms {
                    if !(loc > 0.0 && loc.is_finite() && mass > 0.0 && mass.is_finite()) {
                        return Err(Error::InvalidParameter("atoms need positive location and mass".into()));
                    }
                }
            }
        }
        Ok(())
    }

    /// ∫(1 - e^{-sy}) μ(dy).
    pub fn laplace_exponent(&self, s: f64) -> Result<f64> {
        Ok(match self {
            LevyMeasure::StablePower { alpha, scale } => scale * s.powf(*alpha),
            LevyMeasure::ScaledDistribution { base, rate } => rate * base.lt_complement(s)?,
            LevyMeasure::Atomic { atoms } => atoms.iter().map(|&(l, m)| -m * (-s * l).exp_m1()).sum(),
        })
    }

    /// μ(y, ∞).
    pub fn tail(&self, y: f64) -> Result<f64> {
        Ok(match self {
            LevyMeasure::StablePower { alpha, scale } => scale * y.powf(-alpha) * rgamma(1.0 - alpha),
            LevyMeasure::ScaledDistribution { base, rate } => rate * base.tail(y)?,
            LevyMeasure::Atomic { atoms } => atoms.iter().filter(|a| a.0 > y).map(|a| a.1).sum(),
        })
    }

    /// I_μ(s) = ∫_0^s μ(y, ∞) dy.
    pub fn integrated_tail(&self, s: f64) -> Result<f64> {
        if s < 0.0 {
            return Err(Error::InvalidParameter("integrated tail needs s >= 0".into()));
        }
        Ok(match self {
            LevyMeasure::StablePower { alpha, scale } => scale * s.powf(1.0 - alpha) / gamma(2.0 - alpha),
            LevyMeasure::ScaledDistribution { base, rate } => rate * base.integrated_tail(s)?,
            LevyMeasure::Atomic { atoms } => atoms.iter().map(|&(l, m)| m * s.min(l)).sum(),
        })
    }

    pub fn total_mass(&self) -> f64 {
        match self {
            LevyMeasure::StablePower { .. } => f64::INFINITY,
            LevyMeasure::ScaledDistribution { rate, .. } => *rate,
            LevyMeasure::Atomic { atoms } => atoms.iter().map(|a| a.1).sum(),
        }
    }

    pub fn first_moment(&self) -> Result<f64> {
        Ok(match self {
            LevyMeasure::StablePower { .. } => f64::INFINITY,
            LevyMeasure::ScaledDistribution { base, rate } => rate * base.mean()?,
            LevyMeasure::Atomic { atoms } => atoms.iter().map(|&(l, m)| l * m).sum(),
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct SymbolRepr {
    drift: f64,
    measure: Option<LevyMeasure>,
}

/// Characteristics (0, b, μ) of a Bernstein function.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "SymbolRepr", into = "SymbolRepr")]
pub struct BernsteinSymbol {
    drift: f64,
    measure: Option<LevyMeasure>,
    unbounded_certified: bool,
}

impl TryFrom<SymbolRepr> for BernsteinSymbol {
    type Error = Error;
    fn try_from(r: SymbolRepr) -> Result<Self> {
        BernsteinSymbol::new(r.drift, r.measure)
    }
}

impl From<BernsteinSymbol> for SymbolRepr {
    fn from(b: BernsteinSymbol) -> Self {
        SymbolRepr { drift: b.drift, measure: b.measure }
    }
}

impl BernsteinSymbol {
    pub fn new(drift: f64, measure: Option<LevyMeasure>) -> Result<Self> {
        if !(drift >= 0.0 && drift.is_finite()) {
            return Err(Error::InvalidParameter("drift must be finite and non-negative".into()));
        }
        if let Some(m) = &measure {
            m.validate()?;
        }
        let mut s = BernsteinSymbol { drift, measure, unbounded_certified: false };
        s.unbounded_certified = s.check_unbounded();
        Ok(s)
    }

    pub fn identity() -> Self {
        Self::drift_only(1.0).expect("unit drift is valid")
    }

    pub fn drift_only(b: f64) -> Result<Self> {
        Self::new(b, None)
    }

    pub fn stable(alpha: f64, scale: f64) -> Result<Self> {
        Self::new(0.0, Some(LevyMeasure::StablePower { alpha, scale }))
    }

    pub fn drift(&self) -> f64 {
        self.drift
    }

    pub fn measure(&self) -> Option<&LevyMeasure> {
        self.measure.as_ref()
    }

    pub fn unbounded_certified(&self) -> bool {
        self.unbounded_certified
    }

    /// Unboundedness is certified only in the closed cases: positive drift,
    /// or a stable measure. Finite measures without drift give bounded ψ.
    fn check_unbounded(&self) -> bool {
        self.drift > 0.0 || matches!(self.measure, Some(LevyMeasure::StablePower { .. }))
    }

    pub fn eval(&self, s: f64) -> Result<f64> {
        eval_symbol(self, s)
    }
}

pub fn eval_symbol(psi: &BernsteinSymbol, s: f64) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(Error::InvalidParameter(format!("symbol argument {s}")));
    }
    if s == 0.0 {
        return Ok(0.0);
    }
    let jump = match &psi.measure {
        Some(m) => m.laplace_exponent(s)?,
        None => 0.0,
    };
    Ok(psi.drift * s + jump)
}

/// s ↦ f̂(ψ(s)).
pub fn apply_phi_hat(f_hat: &Laplace, psi: &BernsteinSymbol) -> Laplace {
    let (f1, f2) = (f_hat.clone(), f_hat.clone());
    let (p1, p2) = (psi.clone(), psi.clone());
    Laplace::new(move |s| f1.eval(p1.eval(s)?), move |s| f2.complement(p2.eval(s)?))
}

#[derive(Clone, Debug, Serialize)]
pub struct CmOrder {
    pub order: usize,
    /// min over the grid of (-1)^k times the k-th divided difference
    pub worst: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Grid certificate of complete monotonicity, not a proof.
#[derive(Clone, Debug, Serialize)]
pub struct CmReport {
    pub orders: Vec<CmOrder>,
    pub pass: bool,
}

pub fn check_complete_monotone<F: Fn(f64) -> f64>(f: F, grid: &[f64], order: usize) -> Result<CmReport> {
    if grid.len() < order + 2 {
        return Err(Error::InsufficientGrid { needed: order + 2, got: grid.len() });
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("grid must be strictly increasing".into()));
    }
    let mut dd: Vec<f64> = grid.iter().map(|&x| f(x)).collect();
    let mut orders = Vec::with_capacity(order + 1);
    for k in 0..=order {
        if k > 0 {
            dd = (0..dd.len() - 1).map(|i| (dd[i + 1] - dd[i]) / (grid[i + k] - grid[i])).collect();
        }
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let scale = dd.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        let tol = 1e-7 * scale;
        let worst = dd.iter().map(|v| sign * v).fold(f64::INFINITY, f64::min);
        orders.push(CmOrder { order: k, worst, tolerance: tol, pass: worst >= -tol && worst.is_finite() });
    }
    let pass = orders.iter().all(|o| o.pass);
    Ok(CmReport { orders, pass })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum TruncationForm {
    /// drift 1 plus a stable measure of index alpha with scale 1/μ₁
    Stable { alpha: f64 },
    /// drift 1 plus the law of the truncated variable, scaled by 1/μ₁
    General,
}

/// ψ_m(s) = s + (μ₁^m)^{-1} ∫(1 - e^{-sy}) ν(dy), with μ₁^m = E(W·1{W ≤ m}).
pub fn build_truncation_symbol(w: &DistributionSpec, m: f64, form: TruncationForm) -> Result<(BernsteinSymbol, f64)> {
    if !(m > 0.0) {
        return Err(Error::InvalidParameter("truncation level must be positive".into()));
    }
    let mu1 = w.truncated_mean(m)?;
    if !(mu1 > 0.0) {
        return Err(Error::DegenerateTruncation);
    }
    let measure = match form {
        TruncationForm::Stable { alpha } => LevyMeasure::StablePower { alpha, scale: 1.0 / mu1 },
        TruncationForm::General => LevyMeasure::ScaledDistribution { base: DistributionSpec::truncated(w.clone(), m), rate: 1.0 / mu1 },
    };
    Ok((BernsteinSymbol::new(1.0, Some(measure))?, mu1))
}

/// ψ_n(s) = n ψ(a_n s).
pub fn rescale_symbol(psi: &BernsteinSymbol, n: u64, a_n: f64) -> Result<BernsteinSymbol> {
    if !psi.unbounded_certified {
        return Err(Error::UnboundedSymbolRequired);
    }
    if n == 0 || !(a_n > 0.0) {
        return Err(Error::InvalidParameter("rescaling needs n >= 1 and a_n > 0".into()));
    }
    let nf = n as f64;
    let measure = psi.measure.as_ref().map(|m| match m {
        LevyMeasure::StablePower { alpha, scale } => LevyMeasure::StablePower { alpha: *alpha, scale: nf * scale * a_n.powf(*alpha) },
        LevyMeasure::ScaledDistribution { base, rate } => {
            let base = if a_n == 1.0 { base.clone() } else { DistributionSpec::scaled(base.clone(), a_n) };
            LevyMeasure::ScaledDistribution { base, rate: nf * rate }
        }
        LevyMeasure::Atomic { atoms } => LevyMeasure::Atomic { atoms: atoms.iter().map(|&(l, w)| (l * a_n, w * nf)).collect() },
    });
    BernsteinSymbol::new(nf * a_n * psi.drift, measure)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingSchedule {
    pub n: u64,
    pub a_n: f64,
    pub rule: String,
}

/// a_n with 1 - f̂(a_n) = 1/n; a_1 = 1 by convention.
pub fn compute_a_n(f_hat: &Laplace, n: u64) -> Result<ScalingSchedule> {
    compute_a_n_with(f_hat, n, true)
}

pub fn compute_a_n_with(f_hat: &Laplace, n: u64, unit_first: bool) -> Result<ScalingSchedule> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be positive".into()));
    }
    if n == 1 && unit_first {
        return Ok(ScalingSchedule { n, a_n: 1.0, rule: "a_1 = 1 by convention".into() });
    }
    let target = 1.0 / n as f64;
    let c = |a: f64| f_hat.complement(a);
    let (mut lo, mut hi) = (1.0_f64, 1.0_f64);
    if c(1.0)? < target {
        while c(hi)? < target {
            lo = hi;
            hi *= 2.0;
            if hi > 1e300 {
                return Err(Error::RootNotBracketed { lo, hi });
            }
        }
    } else {
        while c(lo)? >= target {
            hi = lo;
            lo *= 0.5;
            if lo < 1e-300 {
                return Err(Error::RootNotBracketed { lo, hi });
            }
        }
    }
    // c(lo) < target <= c(hi)
    while (hi - lo) > 1e-12 * hi {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if c(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(ScalingSchedule { n, a_n: 0.5 * (lo + hi), rule: "root of 1 - f(a) = 1/n by bisection".into() })
}

pub fn integrated_tail(mu: &LevyMeasure, s: f64) -> Result<f64> {
    mu.integrated_tail(s)
}

#[derive(Clone, Debug, Serialize)]
pub struct InjectionPoint {
    pub s: f64,
    pub ratio: f64,
    pub lower: f64,
    pub upper: f64,
    pub violation: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct InjectionReport {
    pub lambda: f64,
    pub points: Vec<InjectionPoint>,
    pub max_violation: f64,
    pub pass: bool,
}

/// Checks the two-sided bound on ψ(1/s)/ψ(1/(λs)) in terms of I_μ. With a
/// drift b the zero-drift bound is applied to the jump part and carried through
/// (b + sψ'(1/s)) / (b/λ + sψ'(1/(λs))).
pub fn certify_injection_bound(psi: &BernsteinSymbol, lambda: f64, s_grid: &[f64]) -> Result<InjectionReport> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter("lambda must be positive".into()));
    }
    let e = std::f64::consts::E;
    let (k_lo, k_hi) = ((e - 1.0) / e, e / (e - 1.0));
    let b = psi.drift;
    let mut points = Vec::with_capacity(s_grid.len());
    for &s in s_grid {
        let ratio = psi.eval(1.0 / s)? / psi.eval(1.0 / (lambda * s))?;
        let (lower, upper) = match &psi.measure {
            None => (1.0, 1.0),
            Some(mu) => {
                let r = lambda * mu.integrated_tail(s)? / mu.integrated_tail(lambda * s)?;
                if b == 0.0 {
                    (k_lo * r, k_hi * r)
                } else {
                    let j = s * mu.laplace_exponent(1.0 / s)?;
                    ((b + j) / (b / lambda + j / (k_lo * r)), (b + j) / (b / lambda + j / (k_hi * r)))
                }
            }
        };
        let violation = (lower - ratio).max(ratio - upper).max(0.0);
        points.push(InjectionPoint { s, ratio, lower, upper, violation });
    }
    let max_violation = points.iter().fold(0.0_f64, |a, p| a.max(p.violation));
    Ok(InjectionReport { lambda, pass: max_violation <= 1e-12, points, max_violation })
}

pub const TOL_REG: f64 = 1e-2;

pub fn default_regularity_sequence() -> Vec<f64> {
    (1..=10).map(|k| 10f64.powi(-k)).collect()
}

/// s/ψ(s) must decrease along the sequence and end below `TOL_REG`.
pub fn check_regularity(psi: &BernsteinSymbol, s_seq: &[f64]) -> Result<bool> {
    if s_seq.len() < 5 {
        return Err(Error::InsufficientGrid { needed: 5, got: s_seq.len() });
    }
    if s_seq.windows(2).any(|w| w[1] >= w[0]) || s_seq[s_seq.len() - 1] <= 0.0 {
        return Err(Error::InvalidParameter("sequence must be strictly decreasing and positive".into()));
    }
    let r: Vec<f64> = s_seq.iter().map(|&s| psi.eval(s).map(|v| s / v)).collect::<Result<_>>()?;
    let decreasing = r.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12));
    Ok(decreasing && r[r.len() - 1] < TOL_REG)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Homogeneity {
    Sub,
    Super,
    Neither,
}

#[derive(Clone, Debug, Serialize)]
pub struct HomogeneityReport {
    pub class: Homogeneity,
    /// (λ, C) witnesses for the reported class; empty for Neither
    pub witnesses: Vec<(f64, f64)>,
    /// the verdict only covers these λ and x values and the C search grid
    pub grid_relative: bool,
}

pub fn homogeneity_c_grid() -> Vec<f64> {
    (-320..=320).map(|j| 2f64.powf(j as f64 / 16.0)).collect()
}

/// Searches C(λ) on a log grid for μ(Cx,∞) ≤ λμ(x,∞) (sub) or the reverse
/// (super) at every x in `xs`.
pub fn check_homogeneity(mu: &LevyMeasure, lambdas: &[f64], xs: &[f64]) -> Result<HomogeneityReport> {
    let cs = homogeneity_c_grid();
    let tails: Vec<f64> = xs.iter().map(|&x| mu.tail(x)).collect::<Result<_>>()?;
    let search = |sub: bool| -> Result<Option<Vec<(f64, f64)>>> {
        let mut w = Vec::new();
        for &lam in lambdas {
            let mut found = None;
            'c: for &c in &cs {
                for (i, &x) in xs.iter().enumerate() {
                    let lhs = mu.tail(c * x)?;
                    let rhs = lam * tails[i];
                    let ok = if sub { lhs <= rhs * (1.0 + 1e-12) } else { rhs <= lhs * (1.0 + 1e-12) };
                    if !ok {
                        continue 'c;
                    }
                }
                found = Some(c);
                break;
            }
            match found {
                Some(c) => w.push((lam, c)),
                None => return Ok(None),
            }
        }
        Ok(Some(w))
    };
    if let Some(w) = search(true)? {
        return Ok(HomogeneityReport { class: Homogeneity::Sub, witnesses: w, grid_relative: true });
    }
    if let Some(w) = search(false)? {
        return Ok(HomogeneityReport { class: Homogeneity::Super, witnesses: w, grid_relative: true });
    }
    Ok(HomogeneityReport { class: Homogeneity::Neither, witnesses: vec![], grid_relative: true })
}
