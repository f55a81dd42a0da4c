//! Step paths on [0, T], monotone time changes, the map H and J1 distances.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

fn norm(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Right-continuous piecewise-constant path. `values` holds the post-jump
/// values, flattened with stride `dim`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepPath {
    horizon: f64,
    dim: usize,
    initial: Vec<f64>,
    epochs: Vec<f64>,
    values: Vec<f64>,
}

impl StepPath {
    pub fn new(horizon: f64, initial: Vec<f64>, epochs: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let dim = initial.len();
        if dim == 0 || !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::InvalidParameter("step path needs dim >= 1 and a positive horizon".into()));
        }
        if values.len() != epochs.len() * dim {
            return Err(Error::InvalidParameter("values do not match epochs".into()));
        }
        if epochs.windows(2).any(|w| w[1] <= w[0]) || epochs.first().is_some_and(|&e| e <= 0.0) || epochs.last().is_some_and(|&e| e > horizon) {
            return Err(Error::InvalidParameter("epochs must be strictly increasing in (0, T]".into()));
        }
        Ok(StepPath { horizon, dim, initial, epochs, values })
    }

    pub fn constant(horizon: f64, value: Vec<f64>) -> Result<Self> {
        Self::new(horizon, value, vec![], vec![])
    }

    /// Builds a path from jump times (non-decreasing, in [0, T]) and jump
    /// vectors. Simultaneous jumps are merged and a jump at 0 moves the initial
    /// value. Jumps after T are dropped.
    pub fn from_jumps(horizon: f64, initial: Vec<f64>, times: &[f64], jumps: &[f64]) -> Result<Self> {
        let dim = initial.len();
        if jumps.len() != times.len() * dim {
            return Err(Error::InvalidParameter("jumps do not match times".into()));
        }
        if times.windows(2).any(|w| w[1] < w[0]) || times.first().is_some_and(|&t| t < 0.0) {
            return Err(Error::InvalidParameter("jump times must be non-decreasing and non-negative".into()));
        }
        let mut init = initial;
        let mut cur = init.clone();
        let mut epochs: Vec<f64> = Vec::new();
        let mut values: Vec<f64> = Vec::new();
        for (k, &t) in times.iter().enumerate() {
            if t > horizon {
                break;
            }
            for d in 0..dim {
                cur[d] += jumps[k * dim + d];
            }
            if t == 0.0 {
                init.clone_from(&cur);
            } else if epochs.last() == Some(&t) {
                let n = values.len();
                values[n - dim..].copy_from_slice(&cur);
            } else {
                epochs.push(t);
                values.extend_from_slice(&cur);
            }
        }
        Self::new(horizon, init, epochs, values)
    }

    /// Scalar path from cumulative post-jump values.
    pub fn scalar(horizon: f64, initial: f64, epochs: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Self::new(horizon, vec![initial], epochs, values)
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn epochs(&self) -> &[f64] {
        &self.epochs
    }

    pub fn n_jumps(&self) -> usize {
        self.epochs.len()
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    /// Value on the k-th step: k = 0 is the initial value, k ≥ 1 follows the k-th epoch.
    pub fn step_value(&self, k: usize) -> &[f64] {
        if k == 0 {
            &self.initial
        } else {
            &self.values[(k - 1) * self.dim..k * self.dim]
        }
    }

    /// Number of epochs ≤ t.
    pub fn count(&self, t: f64) -> usize {
        self.epochs.partition_point(|&e| e <= t)
    }

    pub fn eval(&self, t: f64) -> &[f64] {
        self.step_value(self.count(t))
    }

    pub fn eval_left(&self, t: f64) -> &[f64] {
        self.step_value(self.epochs.partition_point(|&e| e < t))
    }

    pub fn eval1(&self, t: f64) -> f64 {
        self.eval(t)[0]
    }

    /// Component `c` as a scalar path (zero-size jumps are kept).
    pub fn component(&self, c: usize) -> StepPath {
        let values = (0..self.epochs.len()).map(|k| self.values[k * self.dim + c]).collect();
        StepPath { horizon: self.horizon, dim: 1, initial: vec![self.initial[c]], epochs: self.epochs.clone(), values }
    }

    /// Same path observed on [0, h] for h ≤ T.
    pub fn restrict(&self, h: f64) -> Result<StepPath> {
        if !(h > 0.0 && h <= self.horizon) {
            return Err(Error::InvalidParameter("restriction horizon out of range".into()));
        }
        let k = self.count(h);
        Ok(StepPath { horizon: h, dim: self.dim, initial: self.initial.clone(), epochs: self.epochs[..k].to_vec(), values: self.values[..k * self.dim].to_vec() })
    }

    pub fn sup_distance(&self, other: &StepPath) -> Result<f64> {
        if self.dim != other.dim {
            return Err(Error::InvalidParameter("dimension mismatch".into()));
        }
        let mut best = norm(&self.initial, &other.initial);
        let mut ts: Vec<f64> = self.epochs.iter().chain(&other.epochs).copied().filter(|&t| t <= self.horizon.min(other.horizon)).collect();
        ts.sort_by(f64::total_cmp);
        for t in ts {
            best = best.max(norm(self.eval(t), other.eval(t)));
        }
        Ok(best)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("t");
        for d in 0..self.dim {
            s.push_str(&format!(",x{d}"));
        }
        s.push('\n');
        let mut row = |t: f64, v: &[f64]| {
            s.push_str(&t.to_string());
            for x in v {
                s.push(',');
                s.push_str(&x.to_string());
            }
            s.push('\n');
        };
        row(0.0, &self.initial);
        for k in 0..self.epochs.len() {
            row(self.epochs[k], &self.values[k * self.dim..(k + 1) * self.dim]);
        }
        s
    }
}

/// Non-decreasing piecewise-linear map given by knots. Repeated abscissae
/// encode upward jumps; evaluation is right-continuous and constant beyond
/// the last knot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonotoneMap {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

pub type TimeChange = MonotoneMap;

impl MonotoneMap {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.is_empty() || xs.len() != ys.len() {
            return Err(Error::InvalidParameter("knots must be non-empty and paired".into()));
        }
        if xs.windows(2).any(|w| w[1] < w[0]) || ys.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidParameter("knots must be non-decreasing".into()));
        }
        Ok(MonotoneMap { xs, ys })
    }

    pub fn identity(t: f64) -> Self {
        MonotoneMap { xs: vec![0.0, t], ys: vec![0.0, t] }
    }

    pub fn linear(slope: f64, t: f64) -> Self {
        MonotoneMap { xs: vec![0.0, t], ys: vec![0.0, slope * t] }
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn domain_end(&self) -> f64 {
        self.xs[self.xs.len() - 1]
    }

    pub fn is_continuous(&self) -> bool {
        self.xs.windows(2).zip(self.ys.windows(2)).all(|(x, y)| x[1] > x[0] || y[1] == y[0])
    }

    pub fn is_strictly_increasing(&self) -> bool {
        self.xs.windows(2).zip(self.ys.windows(2)).all(|(x, y)| x[1] == x[0] || y[1] > y[0])
    }

    fn interp(&self, i: usize, t: f64) -> f64 {
        let (x0, x1, y0, y1) = (self.xs[i], self.xs[i + 1], self.ys[i], self.ys[i + 1]);
        let y = y0 + (t - x0) / (x1 - x0) * (y1 - y0);
        // keep strict monotonicity inside a rising segment under rounding
        if y >= y1 {
            y1.next_down().max(y0)
        } else {
            y.max(y0)
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let k = self.xs.partition_point(|&x| x <= t);
        if k == 0 {
            return self.ys[0];
        }
        let i = k - 1;
        if i + 1 == self.xs.len() {
            return self.ys[i];
        }
        self.interp(i, t)
    }

    pub fn eval_left(&self, t: f64) -> f64 {
        let k = self.xs.partition_point(|&x| x < t);
        if k == 0 {
            return self.ys[0];
        }
        let i = k - 1;
        if i + 1 == self.xs.len() {
            return self.ys[i];
        }
        if self.xs[i + 1] == t {
            return self.ys[i + 1];
        }
        self.interp(i, t)
    }

    /// inf{x : map(x) ≥ v}; the domain end if v is never reached.
    pub fn first_reach(&self, v: f64) -> f64 {
        let k = self.ys.partition_point(|&y| y < v);
        if k == 0 {
            return self.xs[0];
        }
        if k == self.ys.len() {
            return self.domain_end();
        }
        let (x0, x1, y0, y1) = (self.xs[k - 1], self.xs[k], self.ys[k - 1], self.ys[k]);
        (x0 + (v - y0) / (y1 - y0) * (x1 - x0)).clamp(x0, x1)
    }

    /// Whether the map rises on every interval (t, t + h).
    pub fn increasing_right_of(&self, t: f64) -> bool {
        let k = self.xs.partition_point(|&x| x <= t);
        if k == 0 || k == self.xs.len() {
            return false;
        }
        self.ys[k] > self.ys[k - 1]
    }
}

/// Path of a subordinator on [0, T]: drift between knots plus jumps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubordinatorSkeleton {
    drift: f64,
    horizon: f64,
    map: MonotoneMap,
}

impl SubordinatorSkeleton {
    /// Jumps at `epochs` (strictly increasing, in (0, T]) with linear drift between.
    pub fn from_jumps(drift: f64, horizon: f64, epochs: &[f64], sizes: &[f64]) -> Result<Self> {
        if epochs.len() != sizes.len() || sizes.iter().any(|&s| !(s >= 0.0)) {
            return Err(Error::InvalidParameter("jump sizes must be non-negative and paired".into()));
        }
        let mut xs = vec![0.0];
        let mut ys = vec![0.0];
        let mut level = 0.0;
        let mut last = 0.0;
        for (&t, &s) in epochs.iter().zip(sizes) {
            if t <= last && !(t == 0.0 && last == 0.0) || t > horizon {
                return Err(Error::InvalidParameter("jump epochs must be increasing in (0, T]".into()));
            }
            level += drift * (t - last);
            xs.push(t);
            ys.push(level);
            level += s;
            xs.push(t);
            ys.push(level);
            last = t;
        }
        if last < horizon {
            xs.push(horizon);
            ys.push(level + drift * (horizon - last));
        }
        Ok(SubordinatorSkeleton { drift, horizon, map: MonotoneMap::new(xs, ys)? })
    }

    /// Skeleton observed on a grid: `increments[k]` is D(t_{k+1}) - D(t_k)
    /// with t_0 = 0. Levels at grid points are exact partial sums; the part of
    /// each increment above drift·Δt is placed as a jump at the right end.
    pub fn from_grid(drift: f64, grid: &[f64], increments: &[f64]) -> Result<Self> {
        if grid.len() != increments.len() || grid.is_empty() {
            return Err(Error::InvalidParameter("grid and increments must be paired".into()));
        }
        let mut xs = vec![0.0];
        let mut ys = vec![0.0];
        let (mut after, mut last) = (0.0_f64, 0.0_f64);
        for (&t, &inc) in grid.iter().zip(increments) {
            if !(t > last) || !(inc >= 0.0) {
                return Err(Error::InvalidParameter("grid must increase and increments be non-negative".into()));
            }
            let new_after = after + inc;
            let before = (after + drift * (t - last)).min(new_after);
            xs.push(t);
            ys.push(before);
            if new_after > before {
                xs.push(t);
                ys.push(new_after);
            }
            after = new_after;
            last = t;
        }
        Ok(SubordinatorSkeleton { drift, horizon: last, map: MonotoneMap::new(xs, ys)? })
    }

    pub fn drift(&self) -> f64 {
        self.drift
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.map.eval(t)
    }

    pub fn as_map(&self) -> &MonotoneMap {
        &self.map
    }
}

/// d⁻¹(v) = inf{s : d(s) > v}, returned as a map on [0, d(T)].
pub fn generalized_inverse(d: &MonotoneMap) -> MonotoneMap {
    MonotoneMap { xs: d.ys.clone(), ys: d.xs.clone() }
}

pub fn skeleton_inverse(d: &SubordinatorSkeleton) -> TimeChange {
    generalized_inverse(&d.map)
}

/// H(f, d) = (f_{d⁻¹−})⁺ for a step path and a subordinator path. The jump of
/// f at τ appears at d(τ); the result lives on [0, d(min(T_f, T_d))].
pub fn apply_h(f: &StepPath, d: &SubordinatorSkeleton) -> Result<StepPath> {
    let t_end = f.horizon.min(d.horizon);
    let horizon = d.eval(t_end);
    if !(horizon > 0.0) {
        return Err(Error::InvalidParameter("time change has empty range".into()));
    }
    let k = f.count(t_end);
    let mut init = f.initial.clone();
    let mut epochs: Vec<f64> = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    for i in 1..=k {
        let t = d.eval(f.epochs[i - 1]);
        let v = f.step_value(i);
        if t == 0.0 {
            init = v.to_vec();
        } else if epochs.last() == Some(&t) {
            let n = values.len();
            values[n - f.dim..].copy_from_slice(v);
        } else {
            epochs.push(t);
            values.extend_from_slice(v);
        }
    }
    StepPath::new(horizon, init, epochs, values)
}

/// The defining formula of H evaluated at a single time, with E = d⁻¹:
/// lim_{s↓t} f(E(s)−), which is f(E(t)) where E rises just after t and
/// f(E(t)−) where E is flat there.
pub fn apply_h_at<'a>(f: &'a StepPath, e: &TimeChange, t: f64) -> &'a [f64] {
    let u = e.eval(t);
    if e.increasing_right_of(t) {
        f.eval(u)
    } else {
        f.eval_left(u)
    }
}

fn check_pair(f: &StepPath, g: &StepPath) -> Result<()> {
    if f.dim != g.dim {
        return Err(Error::InvalidParameter("dimension mismatch".into()));
    }
    if f.horizon != g.horizon {
        return Err(Error::InvalidParameter("paths must share the horizon".into()));
    }
    Ok(())
}

/// J1 distance via the explicit λ that sends the i-th jump of g to the i-th
/// jump of f.
pub fn j1_upper(f: &StepPath, g: &StepPath) -> Result<f64> {
    check_pair(f, g)?;
    let m = f.n_jumps();
    if m != g.n_jumps() {
        return Err(Error::JumpCountMismatch { left: m, right: g.n_jumps() });
    }
    let t = f.horizon;
    let mut cost = 0.0_f64;
    for k in 0..=m {
        cost = cost.max(norm(f.step_value(k), g.step_value(k)));
    }
    for k in 0..m {
        cost = cost.max((f.epochs[k] - g.epochs[k]).abs());
    }
    if m > 0 {
        let (a, b) = (f.epochs[m - 1], g.epochs[m - 1]);
        // a jump at T can only be matched at T; otherwise the last jump of the
        // other path is held until the end
        if a == t && b < t {
            cost = cost.max(norm(f.step_value(m - 1), g.step_value(m)));
        } else if b == t && a < t {
            cost = cost.max(norm(f.step_value(m), g.step_value(m - 1)));
        }
    }
    Ok(cost)
}

pub const J1_EXACT_MAX_JUMPS: usize = 8;

fn grid_of(p: &StepPath) -> Vec<f64> {
    let mut v = Vec::with_capacity(p.n_jumps() + 2);
    v.push(0.0);
    v.extend_from_slice(&p.epochs);
    if v[v.len() - 1] < p.horizon {
        v.push(p.horizon);
    }
    v
}

/// Cells are [a_i, a_{i+1}] × [b_j, b_{j+1}]; a path of λ crosses them
/// monotonically. Per cell we keep the lowest entry on the left edge (as t)
/// and on the bottom edge (as u).
fn j1_feasible(f: &StepPath, g: &StepPath, a: &[f64], b: &[f64], eps: f64) -> bool {
    let t_end = f.horizon;
    let nf = f.n_jumps() + 1;
    let ng = g.n_jumps() + 1;
    let edge = |v: &[f64], i: usize| if i < v.len() { v[i] } else { t_end };
    let mut left = vec![f64::INFINITY; nf * ng];
    let mut bottom = vec![f64::INFINITY; nf * ng];
    left[0] = 0.0;
    bottom[0] = 0.0;
    for i in 0..nf {
        for j in 0..ng {
            let c = i * ng + j;
            let (tl, ub) = (left[c], bottom[c]);
            if tl.is_infinite() && ub.is_infinite() {
                continue;
            }
            if norm(f.step_value(i), g.step_value(j)) > eps {
                continue;
            }
            if i + 1 == nf && j + 1 == ng {
                return true;
            }
            let (a0, a1, b0, b1) = (edge(a, i), edge(a, i + 1), edge(b, j), edge(b, j + 1));
            if i + 1 < nf {
                let from = if ub.is_finite() { b0 } else { tl };
                let mut lo = from.max(a1 - eps).max(b0);
                let hi = b1.min(a1 + eps);
                let ok = if a1 == t_end {
                    lo = t_end;
                    from <= t_end && hi >= t_end
                } else {
                    lo <= hi
                };
                if ok {
                    let n = (i + 1) * ng + j;
                    left[n] = left[n].min(lo);
                }
            }
            if j + 1 < ng {
                let from = if tl.is_finite() { a0 } else { ub };
                let mut lo = from.max(b1 - eps).max(a0);
                let hi = a1.min(b1 + eps);
                let ok = if b1 == t_end {
                    lo = t_end;
                    from <= t_end && hi >= t_end
                } else {
                    lo <= hi
                };
                if ok {
                    let n = i * ng + j + 1;
                    bottom[n] = bottom[n].min(lo);
                }
            }
            let corner_ok = (a1 - b1).abs() <= eps && (a1 == b1 || (a1 < t_end && b1 < t_end));
            if i + 1 < nf && j + 1 < ng && corner_ok {
                let n = (i + 1) * ng + j + 1;
                left[n] = left[n].min(b1);
                bottom[n] = bottom[n].min(a1);
            }
        }
    }
    false
}

/// The critical values at which J1 feasibility can change.
pub fn j1_candidates(f: &StepPath, g: &StepPath) -> Vec<f64> {
    let (a, b) = (grid_of(f), grid_of(g));
    let mut c = vec![0.0];
    for x in &a {
        for y in &b {
            c.push((x - y).abs());
        }
    }
    for i in 0..=f.n_jumps() {
        for j in 0..=g.n_jumps() {
            c.push(norm(f.step_value(i), g.step_value(j)));
        }
    }
    c.sort_by(f64::total_cmp);
    c.dedup();
    c
}

/// Exact J1 distance between step paths with at most 8 jumps each.
pub fn j1_exact_small(f: &StepPath, g: &StepPath) -> Result<f64> {
    check_pair(f, g)?;
    for p in [f, g] {
        if p.n_jumps() > J1_EXACT_MAX_JUMPS {
            return Err(Error::TooManyJumps { got: p.n_jumps(), limit: J1_EXACT_MAX_JUMPS });
        }
    }
    let a: Vec<f64> = std::iter::once(0.0).chain(f.epochs.iter().copied()).collect();
    let b: Vec<f64> = std::iter::once(0.0).chain(g.epochs.iter().copied()).collect();
    let cands = j1_candidates(f, g);
    // the largest candidate is always feasible: it dominates T and every value gap
    let (mut lo, mut hi) = (0usize, cands.len() - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if j1_feasible(f, g, &a, &b, cands[mid]) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(cands[lo])
}

/// ω'(δ): infimum over partitions of [0, T) into cells longer than δ of the
/// largest oscillation of the path over a cell [t_{i-1}, t_i).
pub fn modulus_of_continuity(p: &StepPath, delta: f64) -> Result<f64> {
    let t_end = p.horizon;
    if !(delta > 0.0 && delta < t_end) {
        return Err(Error::InvalidParameter("need 0 < delta < T".into()));
    }
    // steps visible on [0, T)
    let m = p.epochs.partition_point(|&e| e < t_end);
    let nsteps = m + 1;
    let mut cands = vec![0.0];
    for i in 0..nsteps {
        for j in i + 1..nsteps {
            cands.push(norm(p.step_value(i), p.step_value(j)));
        }
    }
    cands.sort_by(f64::total_cmp);
    cands.dedup();
    let start = |k: usize| if k == 0 { 0.0 } else { p.epochs[k - 1] };
    let end = |k: usize| if k < m { p.epochs[k] } else { t_end };
    let feasible = |eps: f64| -> bool {
        // earliest[k]: earliest admissible cut inside step k's interval
        let mut earliest = vec![f64::INFINITY; nsteps];
        earliest[0] = 0.0;
        for k in 0..nsteps {
            let s = earliest[k];
            if s.is_infinite() {
                continue;
            }
            // extend the cell over steps k..=l while the diameter stays ≤ eps
            let mut l = k;
            loop {
                if l + 1 == nsteps {
                    if t_end - s > delta {
                        return true;
                    }
                    break;
                }
                // cut at the epoch opening step l+1
                let e = start(l + 1);
                let n = l + 1;
                if e - s > delta {
                    earliest[n] = earliest[n].min(e);
                } else if s + delta < end(n) {
                    // the cut falls inside step n, so the cell also holds f_n
                    if (k..=n).all(|q| norm(p.step_value(q), p.step_value(n)) <= eps) {
                        earliest[n] = earliest[n].min(s + delta);
                    }
                }
                if (k..=l).any(|q| norm(p.step_value(q), p.step_value(l + 1)) > eps) {
                    break;
                }
                l += 1;
            }
        }
        false
    };
    // the largest candidate admits the single cell [0, T)
    let (mut lo, mut hi) = (0usize, cands.len() - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if feasible(cands[mid]) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(cands[lo])
}

/// True iff every gap between consecutive epochs, starting from 0, is < δ.
pub fn check_a_delta(epochs: &[f64], delta: f64) -> bool {
    let mut last = 0.0;
    for &e in epochs {
        if e - last >= delta {
            return false;
        }
        last = e;
    }
    true
}
