//! Dyadic queue coupling of two heavy tails on unit intervals, and the path
//! coupling built on top of it.
//!
//! Throughout, `f1` is the tail of Y (the ψ-image) and `f2` the tail of X
//! (the target waiting time). An interval whose excess F1(I_j) - F2(I_j) is
//! negative is a customer, otherwise a server.

use crate::dist::{DistributionSpec, TailFunction};
use crate::error::{Error, Result};
use crate::paths::{j1_exact_small, StepPath, J1_EXACT_MAX_JUMPS};
use crate::rng::RngStream;
use crate::stats::{fit_power_law, PowerLawFit};
use crate::symbol::{build_truncation_symbol, TruncationForm};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Default)]
struct CompSum {
    s: f64,
    c: f64,
}

impl CompSum {
    fn add(&mut self, x: f64) {
        let t = self.s + x;
        if self.s.abs() >= x.abs() {
            self.c += (self.s - t) + x;
        } else {
            self.c += (x - t) + self.s;
        }
        self.s = t;
    }

    fn value(&self) -> f64 {
        self.s + self.c
    }
}

/// Sub-unit resolution used below `fine_end` so that placement inside the
/// first intervals follows the tail closely.
pub const DEFAULT_FINE_END: usize = 16;
pub const DEFAULT_SUBDIVISIONS: usize = 32;
pub const DEFAULT_J_MAX: usize = 1 << 16;
/// Quantile ladders stop here: with tails known to ~1e-13 relative, the
/// quantile itself is still good to ~1e-3 absolute.
pub const BEYOND_Q_MAX: f64 = 1e9;

/// Tail tabulated on a knot grid containing every integer up to `j_max`.
/// Placement inside an interval interpolates the tail linearly between knots.
#[derive(Clone, Debug)]
pub struct DiscretizedTail {
    j_max: usize,
    knots: Vec<f64>,
    tails: Vec<f64>,
    int_index: Vec<usize>,
    source: Option<TailFunction>,
    beyond_quantiles: Vec<(f64, f64)>,
}

/// Masses of I_j = [j, j+1) for j < j_max under `tail`, with F(0) := 1.
pub fn interval_masses(tail: &TailFunction, j_max: usize) -> Result<DiscretizedTail> {
    interval_masses_with(tail, j_max, DEFAULT_FINE_END, DEFAULT_SUBDIVISIONS)
}

pub fn interval_masses_with(tail: &TailFunction, j_max: usize, fine_end: usize, sub: usize) -> Result<DiscretizedTail> {
    if j_max == 0 || sub == 0 {
        return Err(Error::InvalidParameter("j_max and subdivisions must be positive".into()));
    }
    let mut knots = Vec::with_capacity(j_max + fine_end.min(j_max) * sub + 2);
    let mut int_index = Vec::with_capacity(j_max + 1);
    for j in 0..=j_max {
        int_index.push(knots.len());
        knots.push(j as f64);
        if j == 0 {
            // second knot carries P(X > 0), so an atom at 0 stays at 0
            knots.push(0.0);
        }
        if j < fine_end.min(j_max) {
            knots.extend((1..sub).map(|k| j as f64 + k as f64 / sub as f64));
        }
    }
    let mut tails = Vec::with_capacity(knots.len());
    for (k, &x) in knots.iter().enumerate() {
        let v = if k == 0 { 1.0 } else { tail.eval(x) };
        if !v.is_finite() || !(-1e-12..=1.0 + 1e-12).contains(&v) {
            return Err(Error::InvalidParameter(format!("tail value {v} at {x} is not a probability")));
        }
        // quadrature noise can leave a tail a few ulps non-monotone
        let prev = tails.last().copied().unwrap_or(1.0);
        tails.push(v.clamp(0.0, prev));
    }
    let mut d = DiscretizedTail { j_max, knots, tails, int_index, source: Some(tail.clone()), beyond_quantiles: Vec::new() };
    d.beyond_quantiles = d.tabulate_beyond()?;
    Ok(d)
}

impl DiscretizedTail {
    /// Unit-resolution tail from raw interval masses; totals are not forced
    /// to one, so a single dyadic block can be studied on its own.
    pub fn from_masses(masses: &[f64], residual: f64) -> Result<Self> {
        if masses.iter().chain([&residual]).any(|&m| !(m >= 0.0)) {
            return Err(Error::InvalidParameter("masses must be non-negative".into()));
        }
        let mut acc = CompSum::default();
        acc.add(residual);
        let mut tails = vec![0.0; masses.len() + 1];
        tails[masses.len()] = residual;
        for j in (0..masses.len()).rev() {
            acc.add(masses[j]);
            tails[j] = acc.value();
        }
        Ok(DiscretizedTail {
            j_max: masses.len(),
            knots: (0..=masses.len()).map(|j| j as f64).collect(),
            tails,
            int_index: (0..=masses.len()).collect(),
            source: None,
            beyond_quantiles: Vec::new(),
        })
    }

    pub fn j_max(&self) -> usize {
        self.j_max
    }

    /// F(j) at an integer j ≤ j_max.
    pub fn at(&self, j: usize) -> f64 {
        self.tails[self.int_index[j]]
    }

    pub fn mass(&self, j: usize) -> f64 {
        self.at(j) - self.at(j + 1)
    }

    pub fn masses(&self) -> Vec<f64> {
        (0..self.j_max).map(|j| self.mass(j)).collect()
    }

    pub fn residual(&self) -> f64 {
        self.at(self.j_max)
    }

    pub fn total(&self) -> f64 {
        self.at(0)
    }

    pub fn source(&self) -> Option<&TailFunction> {
        self.source.as_ref()
    }

    /// Sub-cells of I_j as (lo, hi, probability within I_j).
    fn cells(&self, j: usize) -> Vec<(f64, f64, f64)> {
        let (a, b) = (self.int_index[j], self.int_index[j + 1]);
        let m = self.mass(j);
        (a..b)
            .map(|k| {
                let p = if m > 0.0 { (self.tails[k] - self.tails[k + 1]) / m } else { 1.0 / (b - a) as f64 };
                (self.knots[k], self.knots[k + 1], p)
            })
            .collect()
    }

    /// The point of I_j at conditional upper level v in (0,1).
    pub fn place(&self, j: usize, v: f64) -> f64 {
        let (a, b) = (self.int_index[j], self.int_index[j + 1]);
        let m = self.mass(j);
        if !(m > 0.0) {
            return j as f64 + v;
        }
        let target = self.tails[a] - v * m;
        // first knot in (a, b] whose tail is ≤ target
        let (mut lo, mut hi) = (a, b);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.tails[mid] <= target {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let (t0, t1) = (self.tails[lo], self.tails[hi]);
        let w = if t0 > t1 { ((t0 - target) / (t0 - t1)).clamp(0.0, 1.0) } else { 0.5 };
        let x = self.knots[lo] + w * (self.knots[hi] - self.knots[lo]);
        x.min((j + 1) as f64).max(j as f64)
    }

    /// Upper quantile levels v ≤ F(j_max) paired with Q(v), on a geometric
    /// ladder, by bisection on the source tail, up to Q = BEYOND_Q_MAX.
    fn tabulate_beyond(&self) -> Result<Vec<(f64, f64)>> {
        let (Some(src), r) = (&self.source, self.residual()) else { return Ok(Vec::new()) };
        if !(r > 0.0) {
            return Ok(Vec::new());
        }
        let mut out = Vec::new();
        let mut lo_x = self.j_max as f64;
        for k in 0..=240 {
            let v = r * 2f64.powf(-(k as f64) / 4.0);
            let mut hi = lo_x.max(1.0) * 2.0;
            while src.eval(hi) > v {
                hi *= 2.0;
                if hi > 1e300 {
                    return Err(Error::RootNotBracketed { lo: lo_x, hi });
                }
            }
            let mut lo = lo_x;
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi || (hi - lo) <= 1e-13 * hi {
                    break;
                }
                if src.eval(mid) > v {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            out.push((v, hi));
            lo_x = hi;
            if hi > BEYOND_Q_MAX {
                break;
            }
        }
        Ok(out)
    }

    /// Q(v) for v in (0, F(j_max)], log-log interpolated on the ladder and
    /// extrapolated with the last slope.
    pub fn beyond_quantile(&self, v: f64) -> f64 {
        let t = &self.beyond_quantiles;
        if t.len() < 2 {
            return self.j_max as f64;
        }
        let k = t.partition_point(|&(tv, _)| tv > v);
        let (i0, i1) = if k == 0 { (0, 1) } else if k >= t.len() { (t.len() - 2, t.len() - 1) } else { (k - 1, k) };
        let ((v0, x0), (v1, x1)) = (t[i0], t[i1]);
        let s = (x1.ln() - x0.ln()) / (v1.ln() - v0.ln());
        (x0.ln() + s * (v.ln() - v0.ln())).exp().max(self.j_max as f64)
    }
}

/// A unit interval, or the whole region beyond j_max.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Slot {
    Interval(usize),
    Beyond,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub customer: usize,
    pub server: usize,
    pub mass: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockSummary {
    pub lo: usize,
    pub hi: usize,
    pub customers: f64,
    pub servers: f64,
    /// uncoupled server mass left in the block (Y side)
    pub residual_plus: f64,
    /// uncoupled customer mass left in the block (X side)
    pub residual_minus: f64,
}

impl BlockSummary {
    /// Signed residual: positive when servers outweigh customers.
    pub fn residual(&self) -> f64 {
        self.residual_plus - self.residual_minus
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualPair {
    pub x: Slot,
    pub y: Slot,
    pub mass: f64,
}

#[derive(Clone, Copy, Debug)]
enum Atom {
    Within(usize),
    Cross(usize),
    Residual(usize),
    BeyondCo,
}

#[derive(Clone, Debug)]
pub struct CouplingPlan {
    pub f1: DiscretizedTail,
    pub f2: DiscretizedTail,
    pub within: Vec<f64>,
    pub cross: Vec<Assignment>,
    pub blocks: Vec<BlockSummary>,
    pub residual_pairs: Vec<ResidualPair>,
    /// mass beyond j_max coupled by joint quantiles
    pub beyond_coupled: f64,
    pub unpaired_x: f64,
    pub unpaired_y: f64,
    last_server: Vec<Option<usize>>,
    x_left: Vec<f64>,
    y_left: Vec<f64>,
    cum: Vec<f64>,
    atoms: Vec<Atom>,
}

/// Dyadic blocks [0,1), [1,2), [2,4), ... cut at j_max.
pub fn dyadic_blocks(j_max: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    if j_max == 0 {
        return out;
    }
    out.push((0, 1));
    let mut lo = 1;
    while lo < j_max {
        let hi = (2 * lo).min(j_max);
        out.push((lo, hi));
        lo *= 2;
    }
    out
}

struct BlockTrace {
    cross: Vec<Assignment>,
    summary: BlockSummary,
    last_server: Vec<(usize, Option<usize>)>,
    x_left: Vec<(usize, f64)>,
    y_left: Vec<(usize, f64)>,
}

/// FIFO service inside one block: customers and servers are both taken in
/// index order and matched along their cumulative excess.
fn queue_block(lo: usize, hi: usize, excess: &[f64]) -> BlockTrace {
    let mut cust = Vec::new();
    let mut serv = Vec::new();
    let (mut c, mut s) = (CompSum::default(), CompSum::default());
    for j in lo..hi {
        let e = excess[j];
        if e < 0.0 {
            let a = c.value();
            c.add(-e);
            cust.push((j, a, c.value()));
        } else {
            let a = s.value();
            s.add(e);
            serv.push((j, a, s.value()));
        }
    }
    let (ctot, stot) = (c.value(), s.value());
    let mut cross = Vec::new();
    let mut last = Vec::with_capacity(cust.len());
    let (mut ci, mut si) = (0, 0);
    let mut last_of: Option<usize> = None;
    while ci < cust.len() && si < serv.len() {
        let (j, c0, c1) = cust[ci];
        let (k, s0, s1) = serv[si];
        let m = c1.min(s1) - c0.max(s0);
        if m > 0.0 {
            cross.push(Assignment { customer: j, server: k, mass: m });
            last_of = Some(k);
        }
        if c1 <= s1 {
            last.push((j, if c1 <= stot { last_of } else { None }));
            last_of = None;
            ci += 1;
            if c1 == s1 {
                si += 1;
            }
        } else {
            si += 1;
        }
    }
    let x_left: Vec<(usize, f64)> = cust[ci..]
        .iter()
        .map(|&(j, c0, c1)| (j, c1 - c0.max(stot)))
        .filter(|&(_, m)| m > 0.0)
        .collect();
    for (n, &(j, _, _)) in cust[ci..].iter().enumerate() {
        // a partly served customer keeps its last server
        last.push((j, if n == 0 { last_of } else { None }));
    }
    let y_left: Vec<(usize, f64)> = serv[si..]
        .iter()
        .map(|&(k, s0, s1)| (k, s1 - s0.max(ctot)))
        .filter(|&(_, m)| m > 0.0)
        .collect();
    let summary = BlockSummary {
        lo,
        hi,
        customers: ctot,
        servers: stot,
        residual_plus: (stot - ctot).max(0.0),
        residual_minus: (ctot - stot).max(0.0),
    };
    BlockTrace { cross, summary, last_server: last, x_left, y_left }
}

/// Within-interval coupling of min(F1(I_j), F2(I_j)), FIFO queues per dyadic
/// block, then FIFO pairing of what every block leaves over.
pub fn dyadic_coupling(f1: &DiscretizedTail, f2: &DiscretizedTail) -> Result<CouplingPlan> {
    if f1.j_max != f2.j_max {
        return Err(Error::InvalidParameter("tails must share j_max".into()));
    }
    let n = f1.j_max;
    let m1 = f1.masses();
    let m2 = f2.masses();
    let within: Vec<f64> = m1.iter().zip(&m2).map(|(a, b)| a.min(*b)).collect();
    let excess: Vec<f64> = m1.iter().zip(&m2).map(|(a, b)| a - b).collect();
    let mut cross = Vec::new();
    let mut blocks = Vec::new();
    let mut last_server = vec![None; n];
    let mut x_left = vec![0.0; n];
    let mut y_left = vec![0.0; n];
    let mut xs: Vec<(Slot, f64)> = Vec::new();
    let mut ys: Vec<(Slot, f64)> = Vec::new();
    for (lo, hi) in dyadic_blocks(n) {
        let t = queue_block(lo, hi, &excess);
        cross.extend(t.cross);
        blocks.push(t.summary);
        for (j, k) in t.last_server {
            last_server[j] = k;
        }
        for (j, m) in t.x_left {
            x_left[j] = m;
            xs.push((Slot::Interval(j), m));
        }
        for (k, m) in t.y_left {
            y_left[k] = m;
            ys.push((Slot::Interval(k), m));
        }
    }
    let (r1, r2) = (f1.residual(), f2.residual());
    let beyond_coupled = r1.min(r2);
    if r2 > r1 {
        xs.push((Slot::Beyond, r2 - r1));
    } else if r1 > r2 {
        ys.push((Slot::Beyond, r1 - r2));
    }
    let (residual_pairs, unpaired_x, unpaired_y) = fifo_pairs(&xs, &ys);
    let mut plan = CouplingPlan {
        f1: f1.clone(),
        f2: f2.clone(),
        within,
        cross,
        blocks,
        residual_pairs,
        beyond_coupled,
        unpaired_x,
        unpaired_y,
        last_server,
        x_left,
        y_left,
        cum: Vec::new(),
        atoms: Vec::new(),
    };
    plan.check_marginals()?;
    plan.build_sampler();
    Ok(plan)
}

fn fifo_pairs(xs: &[(Slot, f64)], ys: &[(Slot, f64)]) -> (Vec<ResidualPair>, f64, f64) {
    let cumulate = |v: &[(Slot, f64)]| {
        let mut acc = CompSum::default();
        v.iter()
            .map(|&(s, m)| {
                let a = acc.value();
                acc.add(m);
                (s, a, acc.value())
            })
            .collect::<Vec<_>>()
    };
    let (cx, cy) = (cumulate(xs), cumulate(ys));
    let mut out = Vec::new();
    let (mut i, mut k) = (0, 0);
    while i < cx.len() && k < cy.len() {
        let (sx, x0, x1) = cx[i];
        let (sy, y0, y1) = cy[k];
        let m = x1.min(y1) - x0.max(y0);
        if m > 0.0 {
            out.push(ResidualPair { x: sx, y: sy, mass: m });
        }
        if x1 <= y1 {
            i += 1;
            if x1 == y1 {
                k += 1;
            }
        } else {
            k += 1;
        }
    }
    let tx = cx.last().map_or(0.0, |c| c.2);
    let ty = cy.last().map_or(0.0, |c| c.2);
    (out, (tx - ty).max(0.0), (ty - tx).max(0.0))
}

/// Marginal check tolerance for plan reproduction.
pub const MARGINAL_TOL: f64 = 1e-12;

/// P(A > B) for independent A ~ U[a0,a1], B ~ U[b0,b1] (degenerate ranges
/// are point masses).
fn prob_greater(a0: f64, a1: f64, b0: f64, b1: f64) -> f64 {
    let tail_a = |b: f64| {
        if a1 <= a0 {
            if a0 > b {
                1.0
            } else {
                0.0
            }
        } else {
            ((a1 - b) / (a1 - a0)).clamp(0.0, 1.0)
        }
    };
    if b1 <= b0 {
        return tail_a(b0);
    }
    // tail_a is piecewise linear with kinks at a0, a1: midpoint rule per piece is exact
    let mut pts = vec![b0, b1];
    for p in [a0, a1] {
        if p > b0 && p < b1 {
            pts.push(p);
        }
    }
    pts.sort_by(f64::total_cmp);
    let mut acc = 0.0;
    for w in pts.windows(2) {
        acc += (w[1] - w[0]) * tail_a(0.5 * (w[0] + w[1]));
    }
    acc / (b1 - b0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoupledTail {
    pub level: u64,
    pub cross: f64,
    pub residual: f64,
    /// largest |Q1(v) - Q2(v)| over the tabulated ladder beyond j_max
    pub beyond_shift: f64,
    /// comonotone mass past the end of the ladder, where the shift is
    /// extrapolated rather than tabulated; not part of `total`
    pub beyond_uncertified: f64,
    /// mass not matched at all (only for tails that do not share a total)
    pub unpaired: f64,
    pub total: f64,
}

impl CouplingPlan {
    fn check_marginals(&self) -> Result<()> {
        let n = self.f1.j_max;
        let mut got_x = self.within.clone();
        let mut got_y = self.within.clone();
        for a in &self.cross {
            got_x[a.customer] += a.mass;
            got_y[a.server] += a.mass;
        }
        for j in 0..n {
            got_x[j] += self.x_left[j];
            got_y[j] += self.y_left[j];
        }
        let mut paired_x = vec![0.0; n + 1];
        let mut paired_y = vec![0.0; n + 1];
        let idx = |s: Slot| match s {
            Slot::Interval(j) => j,
            Slot::Beyond => n,
        };
        for p in &self.residual_pairs {
            paired_x[idx(p.x)] += p.mass;
            paired_y[idx(p.y)] += p.mass;
        }
        for j in 0..n {
            let (ex, ey) = ((got_x[j] - self.f2.mass(j)).abs(), (got_y[j] - self.f1.mass(j)).abs());
            if ex > MARGINAL_TOL || ey > MARGINAL_TOL {
                return Err(Error::MarginalMismatch(ex.max(ey)));
            }
        }
        // leftovers are exactly split among residual pairs and the unpaired remainder
        let lx: f64 = self.x_left.iter().sum::<f64>() + (self.f2.residual() - self.beyond_coupled);
        let ly: f64 = self.y_left.iter().sum::<f64>() + (self.f1.residual() - self.beyond_coupled);
        let px: f64 = paired_x.iter().sum::<f64>() + self.unpaired_x;
        let py: f64 = paired_y.iter().sum::<f64>() + self.unpaired_y;
        let e = (lx - px).abs().max((ly - py).abs());
        if e > MARGINAL_TOL {
            return Err(Error::MarginalMismatch(e));
        }
        Ok(())
    }

    fn build_sampler(&mut self) {
        let mut acc = CompSum::default();
        let mut push = |m: f64, a: Atom, cum: &mut Vec<f64>, atoms: &mut Vec<Atom>| {
            if m > 0.0 {
                acc.add(m);
                cum.push(acc.value());
                atoms.push(a);
            }
        };
        let (mut cum, mut atoms) = (Vec::new(), Vec::new());
        for (j, &m) in self.within.iter().enumerate() {
            push(m, Atom::Within(j), &mut cum, &mut atoms);
        }
        for (i, a) in self.cross.iter().enumerate() {
            push(a.mass, Atom::Cross(i), &mut cum, &mut atoms);
        }
        for (i, p) in self.residual_pairs.iter().enumerate() {
            push(p.mass, Atom::Residual(i), &mut cum, &mut atoms);
        }
        push(self.beyond_coupled, Atom::BeyondCo, &mut cum, &mut atoms);
        self.cum = cum;
        self.atoms = atoms;
    }

    pub fn j_max(&self) -> usize {
        self.f1.j_max
    }

    /// Customers whose last server lies more than i intervals away, read off
    /// the cumulative excess of the block. With C(j) the customer mass up to
    /// and including j, S(k) the server mass up to k, S* the block's server
    /// total and c = min(C(j), S*), a customer that gets any service
    /// (C(j-1) < S*) is i-bad iff S(j-i-1) ≥ c or S(j+i) < c. Customers left
    /// entirely to the residual stage have no server and are never i-bad.
    pub fn find_i_bad(&self, i: usize) -> Vec<usize> {
        let excess: Vec<f64> = (0..self.j_max()).map(|j| self.f1.mass(j) - self.f2.mass(j)).collect();
        let mut out = Vec::new();
        for b in &self.blocks {
            let mut s_cum = Vec::with_capacity(b.hi - b.lo);
            let mut c_cum = Vec::with_capacity(b.hi - b.lo);
            let (mut s, mut c) = (CompSum::default(), CompSum::default());
            for &e in &excess[b.lo..b.hi] {
                if e < 0.0 {
                    c.add(-e);
                } else {
                    s.add(e);
                }
                s_cum.push(s.value());
                c_cum.push(c.value());
            }
            let s_at = |x: isize| -> f64 {
                if x < b.lo as isize {
                    0.0
                } else {
                    s_cum[(x as usize).min(b.hi - 1) - b.lo]
                }
            };
            for j in b.lo..b.hi {
                if excess[j] >= 0.0 {
                    continue;
                }
                let s_tot = s_cum[b.hi - 1 - b.lo];
                let cj = c_cum[j - b.lo];
                let c_prev = if j > b.lo { c_cum[j - 1 - b.lo] } else { 0.0 };
                if c_prev >= s_tot {
                    continue;
                }
                let c = cj.min(s_tot);
                let ji = j as isize;
                if s_at(ji - i as isize - 1) >= c || s_at(ji + i as isize) < c {
                    out.push(j);
                }
            }
        }
        out
    }

    /// The same set by inspecting the recorded service.
    pub fn find_i_bad_direct(&self, i: usize) -> Vec<usize> {
        (0..self.j_max())
            .filter(|&j| self.f1.mass(j) - self.f2.mass(j) < 0.0)
            .filter(|&j| self.last_server[j].is_some_and(|k| k.abs_diff(j) > i))
            .collect()
    }

    pub fn last_server(&self, j: usize) -> Option<usize> {
        self.last_server[j]
    }

    fn slot_cells(&self, tail: &DiscretizedTail, s: Slot) -> Option<Vec<(f64, f64, f64)>> {
        match s {
            Slot::Interval(j) => Some(tail.cells(j)),
            Slot::Beyond => None,
        }
    }

    /// P(|X - Y| > i) for independent placements in the two slots.
    fn pair_exceed(&self, x: Slot, y: Slot, i: u64) -> f64 {
        let (cx, cy) = match (self.slot_cells(&self.f2, x), self.slot_cells(&self.f1, y)) {
            (Some(a), Some(b)) => (a, b),
            // one side lies beyond j_max while i < j_max / 2; counted in full
            _ => return 1.0,
        };
        let (xlo, ylo) = (cx[0].0.floor(), cy[0].0.floor());
        let d = (xlo - ylo).abs();
        let fi = i as f64;
        if d > fi {
            return 1.0;
        }
        if d < fi {
            return 0.0;
        }
        // |j - k| = i: exceeding iff the one further out sits deeper in its interval
        let (hi_cells, lo_cells, hi_base, lo_base) = if xlo > ylo { (&cx, &cy, xlo, ylo) } else { (&cy, &cx, ylo, xlo) };
        let mut p = 0.0;
        for &(a0, a1, pa) in hi_cells {
            for &(b0, b1, pb) in lo_cells {
                p += pa * pb * prob_greater(a0 - hi_base, a1 - hi_base, b0 - lo_base, b1 - lo_base);
            }
        }
        p
    }

    /// P(|X - Y| > i) under the plan. Within-interval couples never exceed
    /// i ≥ 1; cross and residual pairs are evaluated exactly; the jointly
    /// quantile-coupled mass beyond j_max is cleared on the tabulated ladder.
    pub fn coupled_tail_parts(&self, i: u64) -> Result<CoupledTail> {
        if i == 0 {
            return Err(Error::InvalidParameter("level must be at least 1".into()));
        }
        if 2 * (i as usize + 1) > self.j_max() {
            return Err(Error::HorizonTooSmall { j_max: self.j_max(), level: i as usize });
        }
        let mut cross = CompSum::default();
        for a in &self.cross {
            let p = self.pair_exceed(Slot::Interval(a.customer), Slot::Interval(a.server), i);
            if p > 0.0 {
                cross.add(a.mass * p);
            }
        }
        let mut residual = CompSum::default();
        for r in &self.residual_pairs {
            let p = self.pair_exceed(r.x, r.y, i);
            if p > 0.0 {
                residual.add(r.mass * p);
            }
        }
        let mut beyond_shift = 0.0_f64;
        let mut beyond_uncertified = 0.0;
        if self.beyond_coupled > 0.0 {
            let floor = self.f2.beyond_quantiles.last().map_or(self.beyond_coupled, |q| q.0).min(self.f1.beyond_quantiles.last().map_or(self.beyond_coupled, |q| q.0));
            beyond_uncertified = floor.min(self.beyond_coupled);
            for &(v, x2) in &self.f2.beyond_quantiles {
                if v <= self.beyond_coupled && v >= beyond_uncertified {
                    beyond_shift = beyond_shift.max((self.f1.beyond_quantile(v) - x2).abs());
                }
            }
            if beyond_shift >= i as f64 {
                return Err(Error::HorizonTooSmall { j_max: self.j_max(), level: i as usize });
            }
        }
        let total = cross.value() + residual.value();
        Ok(CoupledTail { level: i, cross: cross.value(), residual: residual.value(), beyond_shift, beyond_uncertified, unpaired: self.unpaired_x + self.unpaired_y, total })
    }

    pub fn coupled_tail(&self, i: u64) -> Result<f64> {
        Ok(self.coupled_tail_parts(i)?.total)
    }

    fn place_slot(&self, tail: &DiscretizedTail, s: Slot, lo_level: f64, rng: &mut RngStream) -> f64 {
        match s {
            Slot::Interval(j) => tail.place(j, rng.open01()),
            Slot::Beyond => {
                let r = tail.residual();
                tail.beyond_quantile(lo_level + (r - lo_level) * rng.open01())
            }
        }
    }

    /// One draw (x, y) with x ~ F2 and y ~ F1.
    pub fn sample_pair(&self, rng: &mut RngStream) -> Result<(f64, f64)> {
        let total = *self.cum.last().ok_or(Error::EmptySample)?;
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidModel(format!("plan carries mass {total}, not a probability coupling")));
        }
        let u = total * rng.open01();
        let k = self.cum.partition_point(|&c| c <= u).min(self.atoms.len() - 1);
        Ok(match self.atoms[k] {
            Atom::Within(j) => {
                let v = rng.open01();
                (self.f2.place(j, v), self.f1.place(j, v))
            }
            Atom::Cross(i) => {
                let a = self.cross[i];
                (self.f2.place(a.customer, rng.open01()), self.f1.place(a.server, rng.open01()))
            }
            Atom::Residual(i) => {
                let p = self.residual_pairs[i];
                let b = self.beyond_coupled;
                (self.place_slot(&self.f2, p.x, b, rng), self.place_slot(&self.f1, p.y, b, rng))
            }
            Atom::BeyondCo => {
                let v = self.beyond_coupled * rng.open01();
                (self.f2.beyond_quantile(v), self.f1.beyond_quantile(v))
            }
        })
    }

    /// Plan rows (x interval, y interval, mass); j_max stands for beyond.
    pub fn to_csv(&self) -> String {
        let n = self.j_max();
        let idx = |s: Slot| match s {
            Slot::Interval(j) => j,
            Slot::Beyond => n,
        };
        let mut out = String::from("kind,j,k,mass\n");
        for (j, &m) in self.within.iter().enumerate() {
            if m > 0.0 {
                let _ = writeln!(out, "within,{j},{j},{m:.17e}");
            }
        }
        for a in &self.cross {
            let _ = writeln!(out, "cross,{},{},{:.17e}", a.customer, a.server, a.mass);
        }
        for p in &self.residual_pairs {
            let _ = writeln!(out, "residual,{},{},{:.17e}", idx(p.x), idx(p.y), p.mass);
        }
        if self.beyond_coupled > 0.0 {
            let _ = writeln!(out, "beyond,{n},{n},{:.17e}", self.beyond_coupled);
        }
        out
    }
}

/// Plan between X ~ `w` (tail index α) and Y = W_m + D_{W_m/μ₁}, the image
/// of the truncation W·1{W ≤ m} under ψ_m(s) = s + s^α/μ₁.
pub fn truncation_plan(w: &DistributionSpec, alpha: f64, m: f64, j_max: usize) -> Result<CouplingPlan> {
    let (psi, _) = build_truncation_symbol(w, m, TruncationForm::Stable { alpha })?;
    let y = DistributionSpec::phi_mapped(DistributionSpec::truncated(w.clone(), m), psi);
    let f1 = interval_masses(&y.tail_function()?, j_max)?;
    let f2 = interval_masses(&w.tail_function()?, j_max)?;
    dyadic_coupling(&f1, &f2)
}

pub fn find_i_bad(plan: &CouplingPlan, i: usize) -> Vec<usize> {
    plan.find_i_bad(i)
}

pub fn coupled_tail(plan: &CouplingPlan, i: u64) -> Result<f64> {
    plan.coupled_tail(i)
}

pub fn sample_pair_from_plan(plan: &CouplingPlan, rng: &mut RngStream) -> Result<(f64, f64)> {
    plan.sample_pair(rng)
}

/// Grid estimates of the slow-variation and discrepancy moduli:
/// ε¹_i = sup_{j ≥ i} sup_{1 ≤ λ ≤ 2} |L(jλ)/L(j) - 1| with L(t) = t^α F2(t),
/// ε²_i = sup_{t ≥ i} |g(t) / F2(t)| with g = F1 - F2, both over integers up
/// to j_max (λ on eighths).
pub fn epsilon_estimates(plan: &CouplingPlan, alpha: f64, i: usize) -> (f64, f64) {
    let n = plan.j_max();
    let l = |t: usize| (t as f64).powf(alpha) * plan.f2.at(t);
    let (mut e1, mut e2) = (0.0_f64, 0.0_f64);
    for j in i.max(1)..=n {
        let lj = l(j);
        for k in 1..=8 {
            let t = j + (j * k) / 8;
            if t > n {
                break;
            }
            if lj > 0.0 {
                e1 = e1.max((l(t) / lj - 1.0).abs());
            }
        }
        let f2 = plan.f2.at(j);
        if f2 > 0.0 {
            e2 = e2.max(((plan.f1.at(j) - f2) / f2).abs());
        }
    }
    (e1, e2)
}

/// Lower end of the range where i-bad intervals can appear:
/// ((i+1)α)^{1/(α+1)} (2^{⌊log₂ i⌋})^{α/(1+α)} (2ε²_t + ε¹_t)^{-1/(1+α)} - 1
/// with t = 2^{⌊log₂ i⌋}.
pub fn bad_threshold(plan: &CouplingPlan, alpha: f64, i: usize) -> f64 {
    let t = 1usize << (usize::BITS - 1 - i.max(1).leading_zeros());
    let (e1, e2) = epsilon_estimates(plan, alpha, t);
    let eps = 2.0 * e2 + e1;
    if eps <= 0.0 {
        return f64::INFINITY;
    }
    ((i as f64 + 1.0) * alpha).powf(1.0 / (alpha + 1.0)) * (t as f64).powf(alpha / (1.0 + alpha)) * eps.powf(-1.0 / (1.0 + alpha)) - 1.0
}

/// Step-2 quantities for one pair of paths sharing the jumps `j`: the Y path
/// waits `a_n w_i`, the X path waits `a_n u_i`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Step2Bound {
    pub jumps_y: usize,
    pub jumps_x: usize,
    /// Σ_{i ≤ M} a_n |w_i - u_i| with M the larger count before T - ε/2
    pub l1: f64,
    pub s_bar_y: f64,
    pub s_bar_x: f64,
    /// l1 + S̄_Y + S̄_X over the window [T - ε/2, T]
    pub window_bound: f64,
    /// max_i |τ^Y_i - τ^X_i| over the jumps both paths make by T, taken
    /// across whole runs of simultaneous jumps
    pub shift: f64,
    /// oscillation of the jumps only one of the paths makes by T
    pub s_bar_extra: f64,
    /// largest range of partial sums over a run of simultaneous jumps
    pub tie_range: f64,
    /// max(shift, s_bar_extra, tie_range): the J1 cost of matching i-th jumps
    pub matched_bound: f64,
}

fn epochs(waits: &[f64], a_n: f64) -> Vec<f64> {
    let mut t = 0.0;
    waits
        .iter()
        .map(|w| {
            t += a_n * w;
            t
        })
        .collect()
}

/// sup over the index range of |partial sums starting at its first index|.
fn oscillation(j: &[f64], range: std::ops::Range<usize>) -> f64 {
    let mut s = 0.0_f64;
    let mut best = 0.0_f64;
    for k in range {
        s += j[k];
        best = best.max(s.abs());
    }
    best
}

pub fn step2_bound(w: &[f64], u: &[f64], j: &[f64], a_n: f64, horizon: f64, eps: f64) -> Result<Step2Bound> {
    if w.len() != u.len() || w.len() != j.len() {
        return Err(Error::InvalidParameter("waits and jumps must have one entry per index".into()));
    }
    let ty = epochs(w, a_n);
    let tx = epochs(u, a_n);
    let count = |t: &[f64], b: f64| t.partition_point(|&s| s <= b);
    let (ny, nx) = (count(&ty, horizon), count(&tx, horizon));
    if (ny == w.len() || nx == u.len()) && !w.is_empty() {
        let ends = (ty.last().copied().unwrap_or(0.0), tx.last().copied().unwrap_or(0.0));
        if ends.0 <= horizon || ends.1 <= horizon {
            return Err(Error::InvalidParameter("supply waits until both paths pass the horizon".into()));
        }
    }
    let cut = horizon - eps / 2.0;
    let (my, mx) = (count(&ty, cut), count(&tx, cut));
    let m = my.max(mx);
    let l1: f64 = (0..m).map(|i| a_n * (w[i] - u[i]).abs()).sum();
    let s_bar_y = oscillation(j, my..ny);
    let s_bar_x = oscillation(j, mx..nx);
    let common = nx.min(ny);
    // zero waits make runs of simultaneous jumps; a run is matched as a
    // whole, costing the spread of its times and the range of its partial sums
    let mut shift = 0.0_f64;
    let mut tie_range = 0.0_f64;
    let mut a = 0;
    while a < common {
        let mut b = a;
        while b + 1 < common && (ty[b + 1] == ty[b] || tx[b + 1] == tx[b]) {
            b += 1;
        }
        shift = shift.max((ty[b] - tx[a]).abs()).max((tx[b] - ty[a]).abs());
        // a jump at time 0 moves the initial value and cannot be matched either
        if b > a || ty[a] == 0.0 || tx[a] == 0.0 {
            let (mut p, mut lo, mut hi) = (0.0_f64, 0.0_f64, 0.0_f64);
            for &x in &j[a..=b] {
                p += x;
                lo = lo.min(p);
                hi = hi.max(p);
            }
            tie_range = tie_range.max(hi - lo);
        }
        a = b + 1;
    }
    let s_bar_extra = oscillation(j, common..nx.max(ny));
    Ok(Step2Bound {
        jumps_y: ny,
        jumps_x: nx,
        l1,
        s_bar_y,
        s_bar_x,
        window_bound: l1 + s_bar_y + s_bar_x,
        shift,
        s_bar_extra,
        tie_range,
        matched_bound: shift.max(s_bar_extra).max(tie_range),
    })
}

/// inf{ε : P(d > ε) < ε} for the empirical law of `d`.
pub fn prohorov_estimate(d: &[f64]) -> f64 {
    if d.is_empty() {
        return f64::NAN;
    }
    let mut v = d.to_vec();
    v.sort_by(|a, b| b.total_cmp(a));
    let r = v.len() as f64;
    // for ε in [v[k], v[k-1]) exactly k values exceed ε
    let mut best = f64::INFINITY;
    for k in 0..=v.len() {
        let lo = if k < v.len() { v[k] } else { 0.0 };
        let hi = if k == 0 { f64::INFINITY } else { v[k - 1] };
        let cand = lo.max(k as f64 / r);
        if cand < hi {
            best = best.min(cand);
        }
    }
    best
}

/// How the waits W (target) and U (ψ-image) of one index are drawn.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pairing {
    /// (W, U) from the dyadic plan
    Plan,
    /// W and U independent, each with its plan marginal
    Independent,
    /// U = W
    Identical,
}

#[derive(Clone, Debug, Serialize)]
pub struct PathCouplingReport {
    pub n: u64,
    pub a_n: f64,
    pub epsilon: f64,
    pub reps: usize,
    pub mean_l1: f64,
    pub mean_window_bound: f64,
    pub mean_matched_bound: f64,
    /// fraction of replicas whose window bound exceeds epsilon
    pub p_window_exceeds: f64,
    pub eps_hat: f64,
    pub eps_hat_window: f64,
    pub exact_checked: usize,
    pub exact_violations: usize,
    pub matched: Vec<f64>,
}

fn draw_pair(plan: &CouplingPlan, pairing: Pairing, rng: &mut RngStream) -> Result<(f64, f64)> {
    match pairing {
        Pairing::Plan => plan.sample_pair(rng).map(|(x, y)| (y, x)),
        Pairing::Identical => {
            let (x, _) = plan.sample_pair(rng)?;
            Ok((x, x))
        }
        Pairing::Independent => {
            let (x, _) = plan.sample_pair(rng)?;
            let (_, y) = plan.sample_pair(rng)?;
            Ok((y, x))
        }
    }
}

/// Scalar step path of the given waits and jumps on [0, T].
fn path_of(waits: &[f64], jumps: &[f64], a_n: f64, horizon: f64) -> Result<StepPath> {
    let t = epochs(waits, a_n);
    let k = t.partition_point(|&s| s <= horizon);
    StepPath::from_jumps(horizon, vec![0.0], &t[..k], &jumps[..k])
}

/// Replicas of Y^n (waits n^{-1/α} W_i, W ~ F1) and X^n (waits n^{-1/α} U_i,
/// U ~ F2) sharing jumps n^{-1/2} J_i with J standard normal.
pub fn path_coupling_distance(plan: &CouplingPlan, alpha: f64, pairing: Pairing, n: u64, epsilon: f64, horizon: f64, reps: usize, rng: &mut RngStream) -> Result<PathCouplingReport> {
    if n == 0 || reps == 0 || !(horizon > 0.0) {
        return Err(Error::InvalidParameter("need n ≥ 1, reps ≥ 1 and a positive horizon".into()));
    }
    let a_n = (n as f64).powf(-1.0 / alpha);
    let sj = (n as f64).powf(-0.5);
    let mut window = Vec::with_capacity(reps);
    let mut matched = Vec::with_capacity(reps);
    let (mut l1_sum, mut exact_checked, mut exact_violations) = (0.0, 0, 0);
    let (mut w, mut u, mut j) = (Vec::new(), Vec::new(), Vec::new());
    for _ in 0..reps {
        let mut r = rng.split();
        w.clear();
        u.clear();
        j.clear();
        let (mut sw, mut su) = (0.0, 0.0);
        while sw <= horizon || su <= horizon {
            let (a, b) = draw_pair(plan, pairing, &mut r)?;
            let z: f64 = StandardNormal.sample(&mut r);
            sw += a_n * a;
            su += a_n * b;
            w.push(a);
            u.push(b);
            j.push(sj * z);
            if w.len() >= crate::ctrw::MAX_JUMPS {
                return Err(Error::ZeroProgress(crate::ctrw::MAX_JUMPS));
            }
        }
        let b = step2_bound(&w, &u, &j, a_n, horizon, epsilon)?;
        if b.jumps_y.max(b.jumps_x) <= J1_EXACT_MAX_JUMPS {
            let d = j1_exact_small(&path_of(&w, &j, a_n, horizon)?, &path_of(&u, &j, a_n, horizon)?)?;
            exact_checked += 1;
            if d > b.matched_bound + 1e-12 {
                exact_violations += 1;
            }
        }
        l1_sum += b.l1;
        window.push(b.window_bound);
        matched.push(b.matched_bound);
    }
    let rf = reps as f64;
    Ok(PathCouplingReport {
        n,
        a_n,
        epsilon,
        reps,
        mean_l1: l1_sum / rf,
        mean_window_bound: window.iter().sum::<f64>() / rf,
        mean_matched_bound: matched.iter().sum::<f64>() / rf,
        p_window_exceeds: window.iter().filter(|&&d| d > epsilon).count() as f64 / rf,
        eps_hat: prohorov_estimate(&matched),
        eps_hat_window: prohorov_estimate(&window),
        exact_checked,
        exact_violations,
        matched,
    })
}

/// Constants of the polynomial rate: the stated ξ₀ = min{α/(7α+4),
/// (β-α)/(3β+α+4)}, a rate c < ξ₀, c' = 3c/α and the budgets
/// M₁(n) = c' n ln n, M₂(n) = c' n^{1-αc'} ln n.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateScanPlan {
    pub alpha: f64,
    pub beta: f64,
    pub n_grid: Vec<u64>,
    pub c: f64,
    pub c_prime: f64,
    pub xi0: f64,
}

pub fn xi0_statement(alpha: f64, beta: f64) -> f64 {
    let second = if beta.is_infinite() { 1.0 / 3.0 } else { (beta - alpha) / (3.0 * beta + alpha + 4.0) };
    (alpha / (7.0 * alpha + 4.0)).min(second)
}

/// γ = min{2α, β}.
pub fn gamma_exponent(alpha: f64, beta: f64) -> f64 {
    (2.0 * alpha).min(beta)
}

/// The tail exponent α(γ+1)/(α+1) that the Pareto example derives for |X - Y|.
pub fn xi0_proof(alpha: f64, beta: f64) -> f64 {
    alpha * (gamma_exponent(alpha, beta) + 1.0) / (alpha + 1.0)
}

/// c(ξ) = (ξ - α)/(3ξ + α).
pub fn c_of_xi(alpha: f64, xi: f64) -> f64 {
    (xi - alpha) / (3.0 * xi + alpha)
}

impl RateScanPlan {
    /// `c` defaults to half the stated ξ₀.
    pub fn new(alpha: f64, beta: f64, n_grid: Vec<u64>, c: Option<f64>) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) || !(beta > alpha) {
            return Err(Error::InvalidParameter("need 0 < α < 1 < ... and β > α".into()));
        }
        if n_grid.len() < 4 || n_grid.windows(2).any(|w| w[1] <= w[0]) || n_grid[0] < 2 {
            return Err(Error::InvalidParameter("n grid needs at least four increasing points above 1".into()));
        }
        let xi0 = xi0_statement(alpha, beta);
        let c = c.unwrap_or(xi0 / 2.0);
        if !(c > 0.0 && c < xi0) {
            return Err(Error::InvalidParameter(format!("rate c = {c} must lie in (0, ξ₀ = {xi0})")));
        }
        Ok(RateScanPlan { alpha, beta, n_grid, c, c_prime: 3.0 * c / alpha, xi0 })
    }

    pub fn m1(&self, n: u64) -> f64 {
        let nf = n as f64;
        self.c_prime * nf * nf.ln()
    }

    pub fn m2(&self, n: u64) -> f64 {
        let nf = n as f64;
        self.c_prime * nf.powf(1.0 - self.alpha * self.c_prime) * nf.ln()
    }

    /// Residual of -c = (c' - 1/α) ξ + 1 when c = c(ξ) and c' = 3c/α.
    pub fn identity_residual(alpha: f64, xi: f64) -> f64 {
        let c = c_of_xi(alpha, xi);
        let cp = 3.0 * c / alpha;
        (-c) - ((cp - 1.0 / alpha) * xi + 1.0)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RateScanPoint {
    pub n: u64,
    pub eps_hat: f64,
    pub eps_hat_window: f64,
    pub mean_matched_bound: f64,
    pub m1: f64,
    pub m2: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RateScanReport {
    pub alpha: f64,
    pub xi0_statement: f64,
    pub xi0_proof: f64,
    pub c: f64,
    pub c_prime: f64,
    pub points: Vec<RateScanPoint>,
    /// ĉ: minus the fitted log-log slope of ε̂(n)
    pub fitted_c: f64,
    pub fit: PowerLawFit,
}

pub fn rate_scan(scan: &RateScanPlan, plan: &CouplingPlan, pairing: Pairing, horizon: f64, reps: usize, rng: &mut RngStream) -> Result<RateScanReport> {
    let mut points = Vec::with_capacity(scan.n_grid.len());
    for (k, &n) in scan.n_grid.iter().enumerate() {
        let mut r = rng.child(k as u64);
        let rep = path_coupling_distance(plan, scan.alpha, pairing, n, 0.1, horizon, reps, &mut r)?;
        points.push(RateScanPoint { n, eps_hat: rep.eps_hat, eps_hat_window: rep.eps_hat_window, mean_matched_bound: rep.mean_matched_bound, m1: scan.m1(n), m2: scan.m2(n) });
    }
    let xs: Vec<f64> = points.iter().map(|p| p.n as f64).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.eps_hat).collect();
    let mut fr = rng.child(u64::MAX);
    let fit = fit_power_law(&xs, &ys, &mut fr)?;
    Ok(RateScanReport {
        alpha: scan.alpha,
        xi0_statement: scan.xi0,
        xi0_proof: xi0_proof(scan.alpha, scan.beta),
        c: scan.c,
        c_prime: scan.c_prime,
        fitted_c: -fit.exponent,
        fit,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::ks_one_sample;
    use proptest::prelude::*;

    /// Block [4, 8) with excesses (-0.2, -0.4, +0.1, +0.7).
    fn worked_example() -> CouplingPlan {
        let f1 = DiscretizedTail::from_masses(&[0.0, 0.0, 0.0, 0.0, 0.1, 0.0, 0.1, 0.7], 0.0).unwrap();
        let f2 = DiscretizedTail::from_masses(&[0.0, 0.0, 0.0, 0.0, 0.3, 0.4, 0.0, 0.0], 0.0).unwrap();
        dyadic_coupling(&f1, &f2).unwrap()
    }

    fn pareto_plan() -> CouplingPlan {
        truncation_plan(&DistributionSpec::pareto_canonical(0.5), 0.5, 10.0, 1024).unwrap()
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-15
    }

    #[test]
    fn worked_example_queue() {
        let plan = worked_example();
        let want = [(4, 6, 0.1), (4, 7, 0.1), (5, 7, 0.4)];
        assert_eq!(plan.cross.len(), 3);
        for (a, (j, k, m)) in plan.cross.iter().zip(want) {
            assert_eq!((a.customer, a.server), (j, k));
            assert!(close(a.mass, m), "{a:?}");
        }
        let b = plan.blocks.iter().find(|b| b.lo == 4).unwrap();
        assert!(close(b.residual(), 0.2), "{b:?}");
        assert_eq!(plan.last_server(4), Some(7));
        assert_eq!(plan.last_server(5), Some(7));
    }

    #[test]
    fn worked_example_bad_sets() {
        let plan = worked_example();
        assert!(plan.find_i_bad(2).contains(&4));
        assert!(!plan.find_i_bad(3).contains(&4));
        assert!(!plan.find_i_bad(4).contains(&4));
        assert_eq!(plan.find_i_bad(1), vec![4, 5]);
        for i in 0..6 {
            assert_eq!(plan.find_i_bad(i), plan.find_i_bad_direct(i), "level {i}");
        }
    }

    #[test]
    fn worked_example_tail() {
        // only (4, 7) is 3 apart; |X - Y| > 3 there iff Y sits deeper in I_7 than X in I_4
        let t = worked_example().coupled_tail_parts(3).unwrap();
        assert!(close(t.cross, 0.05), "{t:?}");
        assert!(t.total <= 0.2);
        assert!(close(t.unpaired, 0.2));
    }

    #[test]
    fn identical_tails_couple_within() {
        let f = interval_masses(&DistributionSpec::pareto_canonical(0.5).tail_function().unwrap(), 256).unwrap();
        let plan = dyadic_coupling(&f, &f).unwrap();
        assert!(plan.cross.is_empty() && plan.residual_pairs.is_empty());
        assert_eq!(plan.coupled_tail(4).unwrap(), 0.0);
        assert!(plan.find_i_bad(1).is_empty());
    }

    #[test]
    fn one_customer_one_server() {
        let f1 = DiscretizedTail::from_masses(&[0.0, 0.0, 0.5, 0.5], 0.0).unwrap();
        let f2 = DiscretizedTail::from_masses(&[0.0, 0.0, 1.0, 0.0], 0.0).unwrap();
        let plan = dyadic_coupling(&f1, &f2).unwrap();
        assert_eq!(plan.cross, vec![Assignment { customer: 2, server: 3, mass: 0.5 }]);
        assert_eq!(plan.blocks[2].residual(), 0.0);
        assert_eq!(plan.coupled_tail(1).unwrap(), 0.25);
    }

    #[test]
    fn exponential_and_point_masses() {
        let f = interval_masses(&DistributionSpec::Exponential { rate: 1.0 }.tail_function().unwrap(), 32).unwrap();
        assert!((f.mass(0) - 0.63212055882855767).abs() < 1e-12);
        let p = interval_masses(&DistributionSpec::PointMass { at: 2.5 }.tail_function().unwrap(), 8).unwrap();
        assert_eq!(p.masses(), vec![0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert!((p.place(2, 0.3) - 2.5).abs() < 1.0 / 32.0);
    }

    #[test]
    fn pareto_masses() {
        let x_m: f64 = 1.0 / std::f64::consts::PI;
        let f = interval_masses(&DistributionSpec::pareto_canonical(0.5).tail_function().unwrap(), 64).unwrap();
        for j in [1usize, 3, 20, 63] {
            let want = (x_m / j as f64).sqrt() - (x_m / (j + 1) as f64).sqrt();
            assert!((f.mass(j) - want).abs() < 1e-13, "{j}");
        }
        assert!((f.mass(0) - (1.0 - x_m.sqrt())).abs() < 1e-13);
        assert!((f.total() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn pareto_plan_marginals_and_queues() {
        let plan = pareto_plan();
        let mut got_x = plan.within.clone();
        let mut got_y = plan.within.clone();
        for a in &plan.cross {
            got_x[a.customer] += a.mass;
            got_y[a.server] += a.mass;
        }
        for p in &plan.residual_pairs {
            if let Slot::Interval(j) = p.x {
                got_x[j] += p.mass;
            }
            if let Slot::Interval(k) = p.y {
                got_y[k] += p.mass;
            }
        }
        for j in 0..plan.j_max() {
            assert!((got_x[j] - plan.f2.mass(j)).abs() < 1e-12, "x {j}");
            assert!((got_y[j] - plan.f1.mass(j)).abs() < 1e-12, "y {j}");
        }
        for b in &plan.blocks {
            let served: f64 = plan.cross.iter().filter(|a| a.customer >= b.lo && a.customer < b.hi).map(|a| a.mass).sum();
            assert!((served - b.customers.min(b.servers)).abs() < 1e-12, "{b:?}");
        }
        assert_eq!(plan.unpaired_x + plan.unpaired_y, 0.0);
    }

    #[test]
    fn pareto_tail_ratio_decreases() {
        let plan = pareto_plan();
        let g = crate::special::gamma(0.5);
        let ratios: Vec<f64> = [8u64, 16, 32, 64, 128].iter().map(|&i| plan.coupled_tail(i).unwrap() * g * (i as f64).sqrt()).collect();
        assert!(ratios.windows(2).all(|w| w[1] < w[0]), "{ratios:?}");
    }

    #[test]
    fn no_bad_interval_below_threshold() {
        let plan = pareto_plan();
        for i in [2usize, 4, 8, 16] {
            let thr = bad_threshold(&plan, 0.5, i);
            assert!(plan.find_i_bad(i).iter().all(|&j| j as f64 >= thr), "{i} {thr}");
        }
    }

    #[test]
    fn sampled_marginals() {
        let plan = pareto_plan();
        let w = DistributionSpec::pareto_canonical(0.5);
        let mut rng = RngStream::new(11, 0);
        let (xs, ys): (Vec<f64>, Vec<f64>) = (0..20_000).map(|_| plan.sample_pair(&mut rng).unwrap()).unzip();
        assert!(ks_one_sample(&xs, |x| 1.0 - w.tail(x).unwrap()).unwrap().pass);
        // Y keeps the atom of the truncation at 0
        let f1 = plan.f1.source().unwrap().clone();
        let atom = 1.0 - f1.eval(0.0);
        let zeros = ys.iter().filter(|&&y| y == 0.0).count() as f64 / ys.len() as f64;
        assert!((zeros - atom).abs() < 4.0 * (atom * (1.0 - atom) / ys.len() as f64).sqrt(), "{zeros} {atom}");
        let pos: Vec<f64> = ys.iter().copied().filter(|&y| y > 0.0).collect();
        assert!(ks_one_sample(&pos, |y| (1.0 - f1.eval(y) - atom) / (1.0 - atom)).unwrap().pass);
    }

    #[test]
    fn identical_tails_sample_alike() {
        let f = interval_masses(&DistributionSpec::pareto_canonical(0.5).tail_function().unwrap(), 256).unwrap();
        let plan = dyadic_coupling(&f, &f).unwrap();
        let mut rng = RngStream::new(4, 0);
        let (xs, ys): (Vec<f64>, Vec<f64>) = (0..10_000).map(|_| plan.sample_pair(&mut rng).unwrap()).unzip();
        assert!(crate::stats::ks_two_sample(&xs, &ys).unwrap().pass);
    }

    #[test]
    fn sampled_x_matches_direct_sampler() {
        let plan = pareto_plan();
        let w = DistributionSpec::pareto_canonical(0.5);
        let mut r1 = RngStream::new(8, 0);
        let mut r2 = RngStream::new(8, 1);
        let xs: Vec<f64> = (0..100_000).map(|_| plan.sample_pair(&mut r1).unwrap().0).collect();
        let direct: Vec<f64> = (0..100_000).map(|_| w.sample(&mut r2).unwrap()).collect();
        assert!(crate::stats::ks_two_sample(&xs, &direct).unwrap().pass);
    }

    #[test]
    fn sampled_gap_matches_plan_tail() {
        let plan = pareto_plan();
        let mut rng = RngStream::new(9, 0);
        let pairs: Vec<(f64, f64)> = (0..100_000).map(|_| plan.sample_pair(&mut rng).unwrap()).collect();
        for i in [4u64, 8, 32] {
            let p = plan.coupled_tail(i).unwrap();
            let hat = pairs.iter().filter(|(x, y)| (x - y).abs() > i as f64).count() as f64 / pairs.len() as f64;
            let se = (p * (1.0 - p) / pairs.len() as f64).sqrt();
            assert!((hat - p).abs() < 3.0 * se, "{i}: {hat} vs {p}");
        }
    }

    #[test]
    fn block_conservation() {
        for plan in [pareto_plan(), worked_example()] {
            for b in &plan.blocks {
                assert!((b.customers + b.residual_plus - b.servers - b.residual_minus).abs() < 1e-15);
                assert!(b.residual_plus == 0.0 || b.residual_minus == 0.0);
            }
        }
    }

    #[test]
    fn plan_beats_independent_pairing() {
        let plan = pareto_plan();
        for seed in 0..20 {
            let mut a = RngStream::new(seed, 0);
            let mut b = RngStream::new(seed, 0);
            let p = path_coupling_distance(&plan, 0.5, Pairing::Plan, 100, 0.1, 1.0, 100, &mut a).unwrap();
            let q = path_coupling_distance(&plan, 0.5, Pairing::Independent, 100, 0.1, 1.0, 100, &mut b).unwrap();
            assert!(p.eps_hat <= q.eps_hat, "{seed}: {} > {}", p.eps_hat, q.eps_hat);
        }
    }

    #[test]
    fn eps_hat_shrinks_with_n() {
        let plan = pareto_plan();
        let mut a = RngStream::new(1, 0);
        let small = path_coupling_distance(&plan, 0.5, Pairing::Plan, 100, 0.1, 1.0, 300, &mut a).unwrap();
        let large = path_coupling_distance(&plan, 0.5, Pairing::Plan, 1000, 0.1, 1.0, 300, &mut a).unwrap();
        assert!(large.eps_hat < small.eps_hat);
    }

    #[test]
    fn horizon_guard() {
        let plan = worked_example();
        assert!(matches!(plan.coupled_tail(4), Err(Error::HorizonTooSmall { .. })));
        assert!(matches!(plan.coupled_tail(0), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn csv_rows() {
        let csv = worked_example().to_csv();
        assert!(csv.starts_with("kind,j,k,mass\n"));
        assert_eq!(csv.lines().filter(|l| l.starts_with("cross,")).count(), 3);
    }

    #[test]
    fn uniform_comparisons() {
        assert!((prob_greater(0.0, 1.0, 0.0, 1.0) - 0.5).abs() < 1e-15);
        assert_eq!(prob_greater(0.5, 0.5, 0.0, 1.0), 0.5);
        assert_eq!(prob_greater(0.0, 1.0, 0.25, 0.25), 0.75);
        assert!((prob_greater(0.0, 0.5, 0.0, 1.0) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn step2_hand_example() {
        let b = step2_bound(&[1.0, 2.0, 5.0], &[1.1, 1.9, 5.0], &[1.0, 1.0, 1.0], 1.0, 4.0, 0.1).unwrap();
        assert!((b.l1 - 0.2).abs() < 1e-12);
        assert!((b.shift - 0.1).abs() < 1e-12);
        assert_eq!(b.s_bar_extra, 0.0);
        let y = path_of(&[1.0, 2.0, 5.0], &[1.0, 1.0, 1.0], 1.0, 4.0).unwrap();
        let x = path_of(&[1.1, 1.9, 5.0], &[1.0, 1.0, 1.0], 1.0, 4.0).unwrap();
        assert!((j1_exact_small(&y, &x).unwrap() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn prohorov_examples() {
        assert_eq!(prohorov_estimate(&[0.0; 5]), 0.0);
        assert_eq!(prohorov_estimate(&[1.0; 4]), 1.0);
        assert_eq!(prohorov_estimate(&[0.5; 10]), 0.5);
        let mut d = vec![0.01; 9];
        d.push(5.0);
        assert!((prohorov_estimate(&d) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn identical_pairing_gives_zero_distance() {
        let plan = pareto_plan();
        let mut rng = RngStream::new(2, 0);
        let r = path_coupling_distance(&plan, 0.5, Pairing::Identical, 100, 0.1, 1.0, 50, &mut rng).unwrap();
        assert_eq!(r.eps_hat, 0.0);
        assert_eq!(r.exact_violations, 0);
    }

    #[test]
    fn matched_bound_dominates_exact() {
        let plan = pareto_plan();
        let mut rng = RngStream::new(5, 0);
        let r = path_coupling_distance(&plan, 0.5, Pairing::Plan, 2, 0.1, 1.0, 400, &mut rng).unwrap();
        assert!(r.exact_checked > 100, "{}", r.exact_checked);
        assert_eq!(r.exact_violations, 0);
    }

    #[test]
    fn rate_constants() {
        assert!((xi0_statement(0.5, f64::INFINITY) - 1.0 / 15.0).abs() < 1e-15);
        assert_eq!(gamma_exponent(0.5, f64::INFINITY), 1.0);
        assert!((xi0_proof(0.5, f64::INFINITY) - 2.0 / 3.0).abs() < 1e-15);
        let p = RateScanPlan::new(0.5, f64::INFINITY, vec![100, 316, 1000, 3162], None).unwrap();
        assert!((p.c - 1.0 / 30.0).abs() < 1e-15);
        assert!((p.c_prime - 0.2).abs() < 1e-15);
        assert!((p.m1(100) - 0.2 * 100.0 * 100f64.ln()).abs() < 1e-9);
        assert!(RateScanPlan::new(0.5, f64::INFINITY, vec![100, 316, 1000, 3162], Some(0.1)).is_err());
        assert!(RateScanPlan::new(0.5, f64::INFINITY, vec![100, 316], None).is_err());
    }

    fn masses_strategy() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (4usize..40).prop_flat_map(|n| (prop::collection::vec(0.0f64..1.0, n), prop::collection::vec(0.0f64..1.0, n)))
    }

    fn normalized(v: &[f64]) -> Vec<f64> {
        let s: f64 = v.iter().sum::<f64>() + 1e-3;
        v.iter().map(|x| x / s).collect()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn plans_reproduce_marginals((a, b) in masses_strategy()) {
            let (a, b) = (normalized(&a), normalized(&b));
            let ra = 1.0 - a.iter().sum::<f64>();
            let rb = 1.0 - b.iter().sum::<f64>();
            let f1 = DiscretizedTail::from_masses(&a, ra.max(0.0)).unwrap();
            let f2 = DiscretizedTail::from_masses(&b, rb.max(0.0)).unwrap();
            let plan = dyadic_coupling(&f1, &f2).unwrap();
            let carried: f64 = plan.within.iter().sum::<f64>() + plan.cross.iter().map(|x| x.mass).sum::<f64>()
                + plan.residual_pairs.iter().map(|x| x.mass).sum::<f64>() + plan.beyond_coupled;
            prop_assert!((carried + plan.unpaired_x - f2.total()).abs() < 1e-12);
            prop_assert!((carried + plan.unpaired_y - f1.total()).abs() < 1e-12);
        }

        #[test]
        fn bad_sets_agree((a, b) in masses_strategy(), i in 0usize..8) {
            let f1 = DiscretizedTail::from_masses(&normalized(&a), 0.0).unwrap();
            let f2 = DiscretizedTail::from_masses(&normalized(&b), 0.0).unwrap();
            let plan = dyadic_coupling(&f1, &f2).unwrap();
            prop_assert_eq!(plan.find_i_bad(i), plan.find_i_bad_direct(i));
        }

        #[test]
        fn coupled_tail_non_increasing((a, b) in masses_strategy()) {
            let f1 = DiscretizedTail::from_masses(&normalized(&a), 0.0).unwrap();
            let f2 = DiscretizedTail::from_masses(&normalized(&b), 0.0).unwrap();
            let plan = dyadic_coupling(&f1, &f2).unwrap();
            let top = (plan.j_max() / 2).saturating_sub(1) as u64;
            let tails: Vec<f64> = (1..=top).map(|i| plan.coupled_tail(i).unwrap()).collect();
            prop_assert!(tails.windows(2).all(|w| w[1] <= w[0] + 1e-15));
        }

        #[test]
        fn prohorov_bounds(d in prop::collection::vec(0.0f64..3.0, 1..60)) {
            let e = prohorov_estimate(&d);
            let frac = d.iter().filter(|&&x| x > e).count() as f64 / d.len() as f64;
            prop_assert!(e <= 1.0 && e >= 0.0);
            prop_assert!(frac <= e + 1e-15);
        }

        #[test]
        fn matched_bound_dominates_j1(
            w in prop::collection::vec(prop_oneof![Just(0.0f64), 0.0f64..1.0], 1..7),
            u in prop::collection::vec(prop_oneof![Just(0.0f64), 0.0f64..1.0], 7),
            j in prop::collection::vec(-1.0f64..1.0, 8),
        ) {
            let n = w.len();
            let mut w = w;
            let mut u = u[..n].to_vec();
            w.push(10.0);
            u.push(10.0);
            let j = &j[..n + 1];
            let b = step2_bound(&w, &u, j, 1.0, 2.5, 0.1).unwrap();
            let d = j1_exact_small(&path_of(&w, j, 1.0, 2.5).unwrap(), &path_of(&u, j, 1.0, 2.5).unwrap()).unwrap();
            prop_assert!(d <= b.matched_bound + 1e-12, "{} > {:?}", d, b);
        }

        #[test]
        fn rate_identity(xi in 0.55f64..0.95) {
            prop_assert!(RateScanPlan::identity_residual(0.5, xi).abs() < 1e-12);
        }
    }
}
