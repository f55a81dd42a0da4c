//! Continuous-time random walks, their time-changed representation, scaled
//! sequences and the two random-environment walks.

use crate::dist::DistributionSpec;
use crate::error::{Error, Result};
use crate::paths::{apply_h_at, generalized_inverse, skeleton_inverse, MonotoneMap, StepPath, SubordinatorSkeleton, TimeChange};
use crate::quad::{self, Tolerance};
use crate::rng::RngStream;
use crate::samplers::{sample_positive_stable, sample_subordinator_increment};
use crate::symbol::{apply_phi_hat, compute_a_n, rescale_symbol, BernsteinSymbol};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// Walks give up after this many jumps without reaching the horizon.
pub const MAX_JUMPS: usize = 10_000_000;

/// Law of a spatial jump J given its waiting time w.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpatialLaw {
    /// ±step along one uniformly chosen axis
    Lattice { dim: usize, step: f64 },
    Gaussian { dim: usize, sigma: f64 },
    Constant { value: Vec<f64> },
    /// N(0, scale²·min(w, cap))
    WaitVariance { cap: f64, scale: f64 },
    /// J = w
    EqualsWait,
}

impl SpatialLaw {
    pub fn dim(&self) -> usize {
        match self {
            SpatialLaw::Lattice { dim, .. } | SpatialLaw::Gaussian { dim, .. } => *dim,
            SpatialLaw::Constant { value } => value.len(),
            SpatialLaw::WaitVariance { .. } | SpatialLaw::EqualsWait => 1,
        }
    }

    pub fn coupled(&self) -> bool {
        matches!(self, SpatialLaw::WaitVariance { .. } | SpatialLaw::EqualsWait)
    }

    pub fn sample_into(&self, w: f64, rng: &mut RngStream, out: &mut Vec<f64>) {
        match self {
            SpatialLaw::Lattice { dim, step } => {
                let axis = rng.random_range(0..*dim);
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                out.extend((0..*dim).map(|d| if d == axis { sign * step } else { 0.0 }));
            }
            SpatialLaw::Gaussian { dim, sigma } => {
                for _ in 0..*dim {
                    let z: f64 = StandardNormal.sample(rng);
                    out.push(sigma * z);
                }
            }
            SpatialLaw::Constant { value } => out.extend_from_slice(value),
            SpatialLaw::WaitVariance { cap, scale } => {
                let z: f64 = StandardNormal.sample(rng);
                out.push(scale * w.min(*cap).sqrt() * z);
            }
            SpatialLaw::EqualsWait => out.push(w),
        }
    }

    /// E(|J|² | W = w).
    pub fn second_moment(&self, w: f64) -> f64 {
        match self {
            SpatialLaw::Lattice { step, .. } => step * step,
            SpatialLaw::Gaussian { dim, sigma } => *dim as f64 * sigma * sigma,
            SpatialLaw::Constant { value } => value.iter().map(|v| v * v).sum(),
            SpatialLaw::WaitVariance { cap, scale } => scale * scale * w.min(*cap),
            SpatialLaw::EqualsWait => w * w,
        }
    }

    fn second_moment_bound(&self) -> Option<f64> {
        match self {
            SpatialLaw::WaitVariance { cap, scale } => Some(scale * scale * cap),
            SpatialLaw::EqualsWait => None,
            _ => Some(self.second_moment(0.0)),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpaceTimeJumpModel {
    pub waiting: DistributionSpec,
    pub spatial: SpatialLaw,
}

impl SpaceTimeJumpModel {
    pub fn new(waiting: DistributionSpec, spatial: SpatialLaw) -> Self {
        SpaceTimeJumpModel { waiting, spatial }
    }

    /// Registration check: E(J | W = w) = 0 tested by sampling at five
    /// quantiles of W, and a uniform bound on the conditional second moment.
    pub fn validate(&self, rng: &mut RngStream) -> Result<()> {
        self.waiting.validate()?;
        if self.spatial.second_moment_bound().is_none_or(|b| !b.is_finite()) {
            return Err(Error::InvalidModel("conditional second moment is unbounded".into()));
        }
        const N: usize = 4000;
        let dim = self.spatial.dim();
        let mut buf = Vec::with_capacity(N * dim);
        for v in [0.9, 0.7, 0.5, 0.3, 0.1] {
            let w = self.waiting.upper_quantile(v)?;
            buf.clear();
            for _ in 0..N {
                self.spatial.sample_into(w, rng, &mut buf);
            }
            for d in 0..dim {
                let xs = buf.iter().skip(d).step_by(dim);
                let (s, s2) = xs.fold((0.0, 0.0), |(a, b), &x| (a + x, b + x * x));
                let mean = s / N as f64;
                let sd = (s2 / N as f64 - mean * mean).max(0.0).sqrt();
                if mean.abs() > 6.0 * sd / (N as f64).sqrt() + 1e-12 {
                    return Err(Error::InvalidModel(format!("E(J | W = {w}) = {mean} is not zero")));
                }
            }
        }
        Ok(())
    }
}

/// Jump times (cumulative waits ≤ horizon) and flattened jumps.
fn renewal_jumps<F>(horizon: f64, spatial: &SpatialLaw, rng: &mut RngStream, mut next_wait: F) -> Result<(Vec<f64>, Vec<f64>)>
where
    F: FnMut(&mut RngStream) -> Result<f64>,
{
    let mut t = 0.0;
    let mut times = Vec::new();
    let mut jumps = Vec::new();
    loop {
        let w = next_wait(rng)?;
        if !(w >= 0.0) {
            return Err(Error::InvalidModel(format!("negative or NaN wait {w}")));
        }
        t += w;
        if t > horizon {
            return Ok((times, jumps));
        }
        spatial.sample_into(w, rng, &mut jumps);
        times.push(t);
        if times.len() >= MAX_JUMPS {
            return Err(Error::ZeroProgress(MAX_JUMPS));
        }
    }
}

fn walk<F>(horizon: f64, spatial: &SpatialLaw, rng: &mut RngStream, next_wait: F) -> Result<StepPath>
where
    F: FnMut(&mut RngStream) -> Result<f64>,
{
    let (times, jumps) = renewal_jumps(horizon, spatial, rng, next_wait)?;
    StepPath::from_jumps(horizon, vec![0.0; spatial.dim()], &times, &jumps)
}

/// X_t = Σ J_k 1{T_k ≤ t} started at 0.
pub fn simulate_ctrw(model: &SpaceTimeJumpModel, horizon: f64, rng: &mut RngStream) -> Result<StepPath> {
    walk(horizon, &model.spatial, rng, |r| model.waiting.sample(r))
}

/// A CTRW whose waits are W'_k = D(T_k) - D(T_{k-1}), with T_k = Σ u_scale·U_i
/// and D a subordinator of symbol psi independent of the U_i.
#[derive(Clone, Debug)]
pub struct TimeChangedRepresentation {
    pub u_spec: DistributionSpec,
    pub psi: BernsteinSymbol,
    pub spatial: SpatialLaw,
    pub u_scale: f64,
}

/// One coupled draw: Y from the waits W', X from the U's, D observed at the
/// renewal epochs of X, and E its inverse.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub y: StepPath,
    pub x: StepPath,
    pub d: SubordinatorSkeleton,
    pub e: TimeChange,
}

impl Scenario {
    /// Times where Y_t differs from (X_{E_t-})^+.
    pub fn violations(&self, times: &[f64]) -> usize {
        times.iter().filter(|&&t| self.y.eval(t) != apply_h_at(&self.x, &self.e, t)).count()
    }
}

impl TimeChangedRepresentation {
    pub fn new(u_spec: DistributionSpec, psi: BernsteinSymbol, spatial: SpatialLaw) -> Result<Self> {
        if !psi.unbounded_certified() {
            return Err(Error::UnboundedSymbolRequired);
        }
        u_spec.validate()?;
        let mean = u_spec.mean()?;
        if !mean.is_finite() {
            return Err(Error::InvalidParameter("U must have a finite mean".into()));
        }
        Ok(TimeChangedRepresentation { u_spec, psi, spatial, u_scale: 1.0 })
    }

    fn draw_u(&self, rng: &mut RngStream) -> Result<f64> {
        Ok(self.u_scale * self.u_spec.sample(rng)?)
    }

    pub fn scenario(&self, horizon: f64, rng: &mut RngStream) -> Result<Scenario> {
        let dim = self.spatial.dim();
        let (mut t, mut level) = (0.0_f64, 0.0_f64);
        let (mut grid, mut incs) = (Vec::new(), Vec::new());
        let (mut x_times, mut y_times, mut jumps) = (Vec::new(), Vec::new(), Vec::new());
        loop {
            let u = self.draw_u(rng)?;
            let w = if u > 0.0 { sample_subordinator_increment(&self.psi, u, rng)? } else { 0.0 };
            t += u;
            level += w;
            self.spatial.sample_into(w, rng, &mut jumps);
            x_times.push(t);
            y_times.push(level);
            if u > 0.0 {
                grid.push(t);
                incs.push(w);
            }
            if level > horizon {
                break;
            }
            if x_times.len() >= MAX_JUMPS {
                return Err(Error::ZeroProgress(MAX_JUMPS));
            }
        }
        let zero = vec![0.0; dim];
        let x = StepPath::from_jumps(t, zero.clone(), &x_times, &jumps)?;
        let y = StepPath::from_jumps(horizon, zero, &y_times, &jumps)?;
        let d = SubordinatorSkeleton::from_grid(self.psi.drift(), &grid, &incs)?;
        let e = skeleton_inverse(&d);
        Ok(Scenario { y, x, d, e })
    }

    /// The Y walk alone, drawing the same variables as `scenario`.
    pub fn sample_y(&self, horizon: f64, rng: &mut RngStream) -> Result<StepPath> {
        walk(horizon, &self.spatial, rng, |r| {
            let u = self.draw_u(r)?;
            if u > 0.0 {
                sample_subordinator_increment(&self.psi, u, r)
            } else {
                Ok(0.0)
            }
        })
    }
}

pub fn build_time_changed_representation(u_spec: DistributionSpec, psi: BernsteinSymbol, spatial: SpatialLaw) -> Result<TimeChangedRepresentation> {
    TimeChangedRepresentation::new(u_spec, psi, spatial)
}

/// Y^n with waits a_n·W, W = Φ_ψ(U), next to its representation through
/// X̊^n (waits U/n) and the subordinator of symbol nψ(a_n ·).
#[derive(Clone, Debug)]
pub struct ScaledPair {
    pub n: u64,
    pub a_n: f64,
    pub w_spec: DistributionSpec,
    pub rep: TimeChangedRepresentation,
}

pub fn scaled_ctrw_pair(u_spec: DistributionSpec, psi: BernsteinSymbol, spatial: SpatialLaw, n: u64) -> Result<ScaledPair> {
    let base = TimeChangedRepresentation::new(u_spec.clone(), psi.clone(), spatial)?;
    let a_n = compute_a_n(&apply_phi_hat(&u_spec.laplace(), &psi), n)?.a_n;
    let psi_n = rescale_symbol(&psi, n, a_n)?;
    let rep = TimeChangedRepresentation { psi: psi_n, u_scale: 1.0 / n as f64, ..base };
    Ok(ScaledPair { n, a_n, w_spec: DistributionSpec::phi_mapped(u_spec, psi), rep })
}

impl ScaledPair {
    pub fn sample_y_direct(&self, horizon: f64, rng: &mut RngStream) -> Result<StepPath> {
        walk(horizon, &self.rep.spatial, rng, |r| Ok(self.a_n * self.w_spec.sample(r)?))
    }

    /// Subordinator of symbol ψ_n on a grid of step dt, linearly interpolated,
    /// until it passes `t_max`; returns its (continuous) inverse.
    pub fn environment(&self, t_max: f64, dt: f64, rng: &mut RngStream) -> Result<TimeChange> {
        let (mut xs, mut ys) = (vec![0.0], vec![0.0]);
        let mut level = 0.0;
        let mut k = 0u64;
        while level <= t_max {
            k += 1;
            level += sample_subordinator_increment(&self.rep.psi, dt, rng)?;
            xs.push(k as f64 * dt);
            ys.push(level);
            if xs.len() >= MAX_JUMPS {
                return Err(Error::ZeroProgress(MAX_JUMPS));
            }
        }
        Ok(generalized_inverse(&MonotoneMap::new(xs, ys)?))
    }

    /// E^n(t) from the same interpolated grid skeleton, without storing it.
    pub fn e_at(&self, t: f64, dt: f64, rng: &mut RngStream) -> Result<f64> {
        let mut level = 0.0;
        let mut k = 0u64;
        loop {
            let inc = sample_subordinator_increment(&self.rep.psi, dt, rng)?;
            if level + inc > t {
                return Ok((k as f64 + (t - level) / inc) * dt);
            }
            level += inc;
            k += 1;
            if k as usize >= MAX_JUMPS {
                return Err(Error::ZeroProgress(MAX_JUMPS));
            }
        }
    }
}

/// X^I_t = X̊_{ξ(t)} for a continuous non-decreasing environment ξ; X̊ has
/// waits drawn from `waits`.
pub fn quenched_type1(xi: &TimeChange, waits: &DistributionSpec, spatial: &SpatialLaw, horizon: f64, rng: &mut RngStream) -> Result<StepPath> {
    if !xi.is_continuous() || xi.eval(0.0) != 0.0 {
        return Err(Error::InvalidParameter("environment must be continuous with xi(0) = 0".into()));
    }
    let s_end = xi.eval(horizon);
    let (times, jumps) = renewal_jumps(s_end, spatial, rng, |r| waits.sample(r))?;
    let theta: Vec<f64> = times.iter().map(|&tau| xi.first_reach(tau)).collect();
    StepPath::from_jumps(horizon, vec![0.0; spatial.dim()], &theta, &jumps)
}

/// Trap depths τ_i of a type II environment, drawn lazily from their own
/// stream so a landscape can be replayed against fresh walks.
#[derive(Clone, Debug)]
pub struct TemporalLandscape {
    pub tau_spec: DistributionSpec,
    pub u_spec: DistributionSpec,
    pub normalizer: f64,
    pub time_scale: f64,
    tau_rng: RngStream,
    cache: Vec<f64>,
}

impl TemporalLandscape {
    /// With `normalize`, the waits U are divided by E(U).
    pub fn new(tau_spec: DistributionSpec, u_spec: DistributionSpec, normalize: bool, time_scale: f64, tau_rng: RngStream) -> Result<Self> {
        tau_spec.validate()?;
        u_spec.validate()?;
        let normalizer = if normalize { u_spec.mean()? } else { 1.0 };
        if !(normalizer > 0.0 && normalizer.is_finite()) {
            return Err(Error::InvalidParameter("U must have a positive finite mean".into()));
        }
        Ok(TemporalLandscape { tau_spec, u_spec, normalizer, time_scale, tau_rng, cache: Vec::new() })
    }

    pub fn tau(&mut self, i: usize) -> Result<f64> {
        while self.cache.len() <= i {
            let t = self.tau_spec.sample(&mut self.tau_rng)?;
            self.cache.push(t);
        }
        Ok(self.cache[i])
    }
}

/// Walk with epochs T_k = time_scale·Σ τ_i U_i for the given landscape.
pub fn quenched_type2(land: &mut TemporalLandscape, spatial: &SpatialLaw, horizon: f64, rng: &mut RngStream) -> Result<StepPath> {
    let mut i = 0usize;
    let scale = land.time_scale / land.normalizer;
    let u_spec = land.u_spec.clone();
    walk(horizon, spatial, rng, |r| {
        let tau = land.tau(i)?;
        i += 1;
        Ok(scale * tau * u_spec.sample(r)?)
    })
}

/// Drivers (A, D) for the general scheme.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DriverProcess {
    Drift { rate: f64 },
    Brownian { sigma: f64 },
    Stable { alpha: f64, scale: f64 },
}

impl DriverProcess {
    pub fn increment(&self, dt: f64, rng: &mut RngStream) -> f64 {
        match self {
            DriverProcess::Drift { rate } => rate * dt,
            DriverProcess::Brownian { sigma } => {
                let z: f64 = StandardNormal.sample(rng);
                sigma * dt.sqrt() * z
            }
            DriverProcess::Stable { alpha, scale } => {
                if dt > 0.0 {
                    sample_positive_stable(*alpha, scale * dt, rng)
                } else {
                    0.0
                }
            }
        }
    }

    fn non_decreasing(&self) -> bool {
        match self {
            DriverProcess::Drift { rate } => *rate > 0.0,
            DriverProcess::Brownian { .. } => false,
            DriverProcess::Stable { .. } => true,
        }
    }
}

/// J_i, W_i are the increments of (A, D) over the renewal intervals of
/// T_i = a_n Σ U_j; the walk performs J_i at Σ W_i.
pub fn general_scheme_ctrw(a: &DriverProcess, d: &DriverProcess, u_spec: &DistributionSpec, a_n: f64, horizon: f64, rng: &mut RngStream) -> Result<StepPath> {
    if !d.non_decreasing() {
        return Err(Error::InvalidModel("time driver must be non-decreasing".into()));
    }
    let mut t = 0.0;
    let (mut times, mut jumps) = (Vec::new(), Vec::new());
    loop {
        let du = a_n * u_spec.sample(rng)?;
        let ja = a.increment(du, rng);
        let wd = d.increment(du, rng);
        t += wd;
        if t > horizon {
            break;
        }
        times.push(t);
        jumps.push(ja);
        if times.len() >= MAX_JUMPS {
            return Err(Error::ZeroProgress(MAX_JUMPS));
        }
    }
    StepPath::from_jumps(horizon, vec![0.0], &times, &jumps)
}

/// Exact draw of A(E_t) for A a drift or Brownian motion and D a drift or
/// stable subordinator, independent.
pub fn general_scheme_reference(a: &DriverProcess, d: &DriverProcess, t: f64, rng: &mut RngStream) -> Result<f64> {
    let e = match d {
        DriverProcess::Drift { rate } if *rate > 0.0 => t / rate,
        // D_x = (scale·x)^{1/α} S exceeds t iff x > t^α S^{-α} / scale
        DriverProcess::Stable { alpha, scale } => t.powf(*alpha) * sample_positive_stable(*alpha, 1.0, rng).powf(-alpha) / scale,
        _ => return Err(Error::InvalidModel("time driver must be non-decreasing".into())),
    };
    Ok(match a {
        DriverProcess::Stable { .. } => return Err(Error::InvalidModel("reference needs a continuous space driver".into())),
        _ => a.increment(e, rng),
    })
}

/// Renewal epochs a_n Σ U_j up to and including the first one past `horizon`.
pub fn renewal_epochs(u_spec: &DistributionSpec, a_n: f64, horizon: f64, rng: &mut RngStream) -> Result<Vec<f64>> {
    let mut t = 0.0;
    let mut out = Vec::new();
    while t <= horizon {
        t += a_n * u_spec.sample(rng)?;
        out.push(t);
        if out.len() >= MAX_JUMPS {
            return Err(Error::ZeroProgress(MAX_JUMPS));
        }
    }
    Ok(out)
}

/// a_n·T_n with T_n the sum of n waits.
pub fn scaled_renewal_time(u_spec: &DistributionSpec, a_n: f64, n: u64, rng: &mut RngStream) -> Result<f64> {
    let mut s = 0.0;
    for _ in 0..n {
        s += u_spec.sample(rng)?;
    }
    Ok(a_n * s)
}

/// Z_t: time from t to the next renewal epoch.
pub fn residual_lifetime(u_spec: &DistributionSpec, t: f64, rng: &mut RngStream) -> Result<f64> {
    let e = renewal_epochs(u_spec, 1.0, t, rng)?;
    Ok(e[e.len() - 1] - t)
}

/// σ²_μ = ∫ σ²(w) μ(dw), integrated over the upper quantile of μ.
pub fn sigma_sq_mu<F: Fn(f64) -> f64>(sigma_sq: F, mu: &DistributionSpec) -> Result<f64> {
    let breaks = mu.quantile_breaks()?;
    quad::integrate_fallible(|v| mu.upper_quantile(v).map(&sigma_sq), 0.0, 1.0, &breaks, Tolerance::new(1e-10, 1e-10))
}

/// Entrywise σ²_μ for a matrix-valued σ² (row-major, `dim`×`dim`).
pub fn sigma_sq_mu_matrix<F: Fn(f64) -> Vec<f64>>(sigma_sq: F, dim: usize, mu: &DistributionSpec) -> Result<Vec<f64>> {
    (0..dim * dim).map(|k| sigma_sq_mu(|w| sigma_sq(w)[k], mu)).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct QvPoint {
    pub t: f64,
    pub xi_t: f64,
    pub mean: f64,
    pub predicted: f64,
    pub std_error: f64,
    pub z: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct QvReport {
    pub points: Vec<QvPoint>,
    pub max_abs_z: f64,
    pub pass: bool,
}

/// Realized quadratic variation of the quenched walk X̊_{ξ(t)} against the
/// renewal-reward prediction ξ(t)·σ²_μ/E(U).
pub fn quenched_variance_check(xi: &TimeChange, waits: &DistributionSpec, spatial: &SpatialLaw, t_grid: &[f64], reps: usize, rng: &mut RngStream) -> Result<QvReport> {
    if t_grid.is_empty() || reps < 2 {
        return Err(Error::InvalidParameter("need a time grid and at least two replicas".into()));
    }
    let horizon = t_grid.iter().copied().fold(0.0, f64::max);
    let rate = sigma_sq_mu(|w| spatial.second_moment(w), waits)? / waits.mean()?;
    let mut sums = vec![(0.0, 0.0); t_grid.len()];
    for _ in 0..reps {
        let mut r = rng.split();
        let p = quenched_type1(xi, waits, spatial, horizon, &mut r)?;
        let mut qv = Vec::with_capacity(p.n_jumps() + 1);
        qv.push(0.0);
        for k in 1..=p.n_jumps() {
            let step: f64 = p.step_value(k).iter().zip(p.step_value(k - 1)).map(|(a, b)| (a - b) * (a - b)).sum();
            qv.push(qv[k - 1] + step);
        }
        for (i, &t) in t_grid.iter().enumerate() {
            let q = qv[p.count(t)];
            sums[i].0 += q;
            sums[i].1 += q * q;
        }
    }
    let nr = reps as f64;
    let points: Vec<QvPoint> = t_grid
        .iter()
        .zip(&sums)
        .map(|(&t, &(s, s2))| {
            let mean = s / nr;
            let var = ((s2 - nr * mean * mean) / (nr - 1.0)).max(0.0);
            let se = (var / nr).sqrt();
            let predicted = xi.eval(t) * rate;
            let z = if se > 0.0 { (mean - predicted) / se } else if mean == predicted { 0.0 } else { f64::INFINITY };
            QvPoint { t, xi_t: xi.eval(t), mean, predicted, std_error: se, z }
        })
        .collect();
    let max_abs_z = points.iter().fold(0.0_f64, |a, p| a.max(p.z.abs()));
    Ok(QvReport { pass: max_abs_z < 3.0, points, max_abs_z })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samplers::sample_mittag_leffler_wait;
    use crate::stats::ks_two_sample;
    use crate::symbol::LevyMeasure;
    use proptest::prelude::*;

    fn exp1() -> DistributionSpec {
        DistributionSpec::Exponential { rate: 1.0 }
    }

    fn query_times(s: &Scenario, horizon: f64, rng: &mut RngStream) -> Vec<f64> {
        let mut ts: Vec<f64> = (0..200).map(|_| horizon * rng.open01()).collect();
        ts.extend(s.y.epochs().iter().copied());
        ts.extend(s.y.epochs().iter().map(|t| t.next_down()));
        ts.push(horizon);
        ts.push(0.0);
        ts
    }

    #[test]
    fn deterministic_walk() {
        let m = SpaceTimeJumpModel::new(DistributionSpec::PointMass { at: 1.0 }, SpatialLaw::Constant { value: vec![1.0] });
        let p = simulate_ctrw(&m, 3.5, &mut RngStream::new(0, 0)).unwrap();
        assert_eq!(p.epochs(), &[1.0, 2.0, 3.0]);
        assert_eq!(p.eval1(3.2), 3.0);
    }

    #[test]
    fn zero_waits_stop() {
        let m = SpaceTimeJumpModel::new(DistributionSpec::PointMass { at: 0.0 }, SpatialLaw::Constant { value: vec![1.0] });
        assert_eq!(simulate_ctrw(&m, 1.0, &mut RngStream::new(0, 0)).unwrap_err(), Error::ZeroProgress(MAX_JUMPS));
    }

    #[test]
    fn registration() {
        let mut rng = RngStream::new(5, 0);
        let ok = SpaceTimeJumpModel::new(DistributionSpec::pareto_canonical(0.5), SpatialLaw::Lattice { dim: 2, step: 1.0 });
        ok.validate(&mut rng).unwrap();
        let ok = SpaceTimeJumpModel::new(exp1(), SpatialLaw::WaitVariance { cap: 1.0, scale: 1.0 });
        ok.validate(&mut rng).unwrap();
        let bad = SpaceTimeJumpModel::new(exp1(), SpatialLaw::EqualsWait);
        assert!(matches!(bad.validate(&mut rng), Err(Error::InvalidModel(_))));
        let bad = SpaceTimeJumpModel::new(exp1(), SpatialLaw::Constant { value: vec![0.0, 0.3] });
        assert!(matches!(bad.validate(&mut rng), Err(Error::InvalidModel(_))));
    }

    #[test]
    fn bounded_symbol_rejected() {
        let psi = BernsteinSymbol::new(0.0, Some(LevyMeasure::Atomic { atoms: vec![(1.0, 1.0)] })).unwrap();
        let r = TimeChangedRepresentation::new(exp1(), psi, SpatialLaw::Lattice { dim: 1, step: 1.0 });
        assert_eq!(r.unwrap_err(), Error::UnboundedSymbolRequired);
    }

    #[test]
    fn pure_drift_is_identity() {
        let rep = TimeChangedRepresentation::new(exp1(), BernsteinSymbol::identity(), SpatialLaw::Lattice { dim: 1, step: 1.0 }).unwrap();
        let s = rep.scenario(5.0, &mut RngStream::new(2, 0)).unwrap();
        for t in [0.0, 0.3, 1.7, 4.9] {
            assert!((s.e.eval(t) - t).abs() < 1e-12);
            assert_eq!(s.y.eval(t), s.x.eval(t));
        }
    }

    #[test]
    fn pathwise_identity_examples() {
        let mut rng = RngStream::new(11, 0);
        let mixed = BernsteinSymbol::new(0.3, Some(LevyMeasure::Atomic { atoms: vec![(0.5, 2.0), (3.0, 0.1)] })).unwrap();
        for psi in [BernsteinSymbol::stable(0.6, 1.0).unwrap(), BernsteinSymbol::drift_only(2.0).unwrap(), mixed] {
            let rep = TimeChangedRepresentation::new(DistributionSpec::Pareto { alpha: 1.5, x_m: 1.0 }, psi, SpatialLaw::Gaussian { dim: 2, sigma: 1.0 }).unwrap();
            for _ in 0..50 {
                let s = rep.scenario(10.0, &mut rng).unwrap();
                let ts = query_times(&s, 10.0, &mut rng);
                assert_eq!(s.violations(&ts), 0);
            }
        }
    }

    #[test]
    fn sample_y_replays_scenario() {
        let rep = TimeChangedRepresentation::new(exp1(), BernsteinSymbol::stable(0.7, 1.0).unwrap(), SpatialLaw::WaitVariance { cap: 2.0, scale: 1.0 }).unwrap();
        let a = rep.scenario(3.0, &mut RngStream::new(4, 4)).unwrap().y;
        let b = rep.sample_y(3.0, &mut RngStream::new(4, 4)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn ml_waits_from_representation() {
        // with U ~ Exp(1) and ψ = s^α the first wait W'_1 is Mittag-Leffler
        let alpha = 0.6;
        let psi = BernsteinSymbol::stable(alpha, 1.0).unwrap();
        let mut rng = RngStream::new(9, 0);
        let w: Vec<f64> = (0..4000)
            .map(|_| {
                let u = exp1().sample(&mut rng).unwrap();
                sample_subordinator_increment(&psi, u, &mut rng).unwrap()
            })
            .collect();
        let ml: Vec<f64> = (0..4000).map(|_| sample_mittag_leffler_wait(alpha, 1.0, &mut rng).unwrap()).collect();
        assert!(ks_two_sample(&w, &ml).unwrap().pass);
    }

    #[test]
    fn n1_reduces_to_base() {
        let pair = scaled_ctrw_pair(exp1(), BernsteinSymbol::stable(0.5, 1.0).unwrap(), SpatialLaw::Lattice { dim: 1, step: 1.0 }, 1).unwrap();
        assert_eq!(pair.a_n, 1.0);
        assert_eq!(pair.rep.u_scale, 1.0);
        assert_eq!(pair.rep.psi.eval(2.0).unwrap(), 2f64.sqrt());
    }

    #[test]
    fn scaled_drift_vanishes() {
        let psi = BernsteinSymbol::new(1.0, Some(LevyMeasure::StablePower { alpha: 0.5, scale: 1.0 })).unwrap();
        let drift = |n| scaled_ctrw_pair(exp1(), psi.clone(), SpatialLaw::Lattice { dim: 1, step: 1.0 }, n).unwrap().rep.psi.drift();
        let (d2, d3, d4) = (drift(100), drift(1000), drift(10_000));
        assert!(d3 < d2 && d4 < d3 && d4 < 0.05, "{d2} {d3} {d4}");
    }

    #[test]
    fn type1_identity_and_plateau() {
        let spatial = SpatialLaw::Lattice { dim: 1, step: 1.0 };
        let id = MonotoneMap::identity(4.0);
        let a = quenched_type1(&id, &exp1(), &spatial, 4.0, &mut RngStream::new(1, 0)).unwrap();
        let b = simulate_ctrw(&SpaceTimeJumpModel::new(exp1(), spatial.clone()), 4.0, &mut RngStream::new(1, 0)).unwrap();
        assert_eq!(a, b);
        let flat = MonotoneMap::new(vec![0.0, 1.0, 2.0, 4.0], vec![0.0, 1.0, 1.0, 3.0]).unwrap();
        for seed in 0..20 {
            let p = quenched_type1(&flat, &exp1(), &spatial, 4.0, &mut RngStream::new(seed, 0)).unwrap();
            assert!(p.epochs().iter().all(|&t| !(t > 1.0 && t <= 2.0)));
        }
    }

    #[test]
    fn type2_unit_traps() {
        let spatial = SpatialLaw::Lattice { dim: 1, step: 1.0 };
        let mut land = TemporalLandscape::new(DistributionSpec::PointMass { at: 1.0 }, exp1(), true, 1.0, RngStream::new(0, 7)).unwrap();
        let a = quenched_type2(&mut land, &spatial, 4.0, &mut RngStream::new(1, 0)).unwrap();
        let b = simulate_ctrw(&SpaceTimeJumpModel::new(exp1(), spatial), 4.0, &mut RngStream::new(1, 0)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn landscape_replays() {
        let mut l1 = TemporalLandscape::new(DistributionSpec::pareto_canonical(0.5), exp1(), false, 1.0, RngStream::new(3, 3)).unwrap();
        let mut l2 = l1.clone();
        let a: Vec<f64> = (0..10).map(|i| l1.tau(i).unwrap()).collect();
        let b: Vec<f64> = (0..10).rev().map(|i| l2.tau(i).unwrap()).collect();
        assert_eq!(a, b.into_iter().rev().collect::<Vec<_>>());
    }

    #[test]
    fn type2_annealed_ml_waits() {
        let alpha = 0.7;
        let tau = DistributionSpec::PositiveStable { alpha, t: 1.0 };
        let u = DistributionSpec::Weibull { shape: alpha, scale: 1.0 };
        let mut rng = RngStream::new(21, 0);
        let w: Vec<f64> = (0..4000).map(|_| tau.sample(&mut rng).unwrap() * u.sample(&mut rng).unwrap()).collect();
        let ml: Vec<f64> = (0..4000).map(|_| sample_mittag_leffler_wait(alpha, 1.0, &mut rng).unwrap()).collect();
        assert!(ks_two_sample(&w, &ml).unwrap().pass);
    }

    #[test]
    fn general_scheme_diagonal() {
        let d = DriverProcess::Drift { rate: 1.0 };
        for n in [10u64, 100, 1000] {
            let p = general_scheme_ctrw(&d, &d, &DistributionSpec::PointMass { at: 1.0 }, 1.0 / n as f64, 1.0, &mut RngStream::new(0, 0)).unwrap();
            let mut worst = 0.0_f64;
            for k in 0..=p.n_jumps() {
                let t0 = if k == 0 { 0.0 } else { p.epochs()[k - 1] };
                let t1 = if k == p.n_jumps() { 1.0 } else { p.epochs()[k] };
                let v = p.step_value(k)[0];
                worst = worst.max((v - t0).abs()).max((v - t1).abs());
            }
            assert!(worst < 2.0 / n as f64, "n={n}: {worst}");
        }
        assert!(general_scheme_ctrw(&DriverProcess::Brownian { sigma: 1.0 }, &DriverProcess::Brownian { sigma: 1.0 }, &exp1(), 0.1, 1.0, &mut RngStream::new(0, 0)).is_err());
    }

    #[test]
    fn general_scheme_reference_drift() {
        let mut rng = RngStream::new(0, 0);
        let v = general_scheme_reference(&DriverProcess::Drift { rate: 3.0 }, &DriverProcess::Drift { rate: 2.0 }, 4.0, &mut rng).unwrap();
        assert_eq!(v, 6.0);
    }

    #[test]
    fn sigma_sq_examples() {
        assert!((sigma_sq_mu(|_| 1.0, &DistributionSpec::pareto_canonical(0.5)).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(sigma_sq_mu(|w| w.min(1.0), &DistributionSpec::PointMass { at: 0.5 }).unwrap(), 0.5);
        let v = sigma_sq_mu(|w| w.min(1.0), &exp1()).unwrap();
        assert!((v - (1.0 - (-1.0f64).exp())).abs() < 1e-6, "{v}");
        let m = sigma_sq_mu_matrix(|_| vec![1.0, 0.0, 0.0, 1.0], 2, &exp1()).unwrap();
        assert_eq!(m, vec![1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn quenched_variance_examples() {
        let spatial = SpatialLaw::Gaussian { dim: 1, sigma: 1.0 };
        let grid = [0.5, 1.0, 2.0];
        let mut rng = RngStream::new(13, 0);
        let r = quenched_variance_check(&MonotoneMap::identity(2.0), &exp1(), &spatial, &grid, 2000, &mut rng).unwrap();
        assert!(r.pass, "{r:?}");
        assert!((r.points[1].predicted - 1.0).abs() < 1e-9);
        let half = MonotoneMap::linear(0.5, 2.0);
        let r = quenched_variance_check(&half, &exp1(), &spatial, &grid, 2000, &mut rng).unwrap();
        assert!(r.pass && (r.points[2].predicted - 1.0).abs() < 1e-9, "{r:?}");
        let flat = MonotoneMap::new(vec![0.0, 0.5, 1.5, 2.0], vec![0.0, 0.5, 0.5, 1.0]).unwrap();
        let r = quenched_variance_check(&flat, &exp1(), &spatial, &[0.5, 1.0, 1.5], 500, &mut rng).unwrap();
        assert_eq!(r.points[0].mean, r.points[2].mean);
    }

    #[test]
    fn relative_stability() {
        let mut rng = RngStream::new(17, 0);
        let xs: Vec<f64> = (0..200).map(|_| scaled_renewal_time(&exp1(), 1e-4, 10_000, &mut rng).unwrap()).collect();
        let mean = xs.iter().sum::<f64>() / 200.0;
        assert!((mean - 1.0).abs() < 0.005);
        let z = residual_lifetime(&exp1(), 100.0, &mut rng).unwrap();
        assert!(z > 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn pathwise_identity(seed in any::<u64>(), alpha in 0.2f64..0.95, drift in 0.0f64..1.0, horizon in 0.5f64..20.0) {
            let psi = BernsteinSymbol::new(drift, Some(LevyMeasure::StablePower { alpha, scale: 1.0 })).unwrap();
            let rep = TimeChangedRepresentation::new(DistributionSpec::Pareto { alpha: 1.2, x_m: 0.5 }, psi, SpatialLaw::Lattice { dim: 2, step: 1.0 }).unwrap();
            let mut rng = RngStream::new(seed, 0);
            let s = rep.scenario(horizon, &mut rng).unwrap();
            let ts = query_times(&s, horizon, &mut rng);
            prop_assert_eq!(s.violations(&ts), 0);
        }
    }
}
