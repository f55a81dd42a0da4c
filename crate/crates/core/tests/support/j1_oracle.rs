// Brute-force J1 distance between step paths: enumerate every monotone route
// through the cell grid (right, up or diagonal moves) and, for each route,
// place the crossing points greedily as low as the band |u - t| ≤ ε allows.

use ctrw_core::paths::StepPath;

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

#[derive(Clone, Copy)]
enum Move {
    Right,
    Up,
    Diag,
}

fn routes(nf: usize, ng: usize) -> Vec<Vec<Move>> {
    fn go(i: usize, j: usize, nf: usize, ng: usize, cur: &mut Vec<Move>, out: &mut Vec<Vec<Move>>) {
        if i + 1 == nf && j + 1 == ng {
            out.push(cur.clone());
            return;
        }
        if i + 1 < nf {
            cur.push(Move::Right);
            go(i + 1, j, nf, ng, cur, out);
            cur.pop();
        }
        if j + 1 < ng {
            cur.push(Move::Up);
            go(i, j + 1, nf, ng, cur, out);
            cur.pop();
        }
        if i + 1 < nf && j + 1 < ng {
            cur.push(Move::Diag);
            go(i + 1, j + 1, nf, ng, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, 0, nf, ng, &mut Vec::new(), &mut out);
    out
}

fn route_ok(f: &StepPath, g: &StepPath, a: &[f64], b: &[f64], route: &[Move], eps: f64) -> bool {
    let t_end = f.horizon();
    let (mut i, mut j) = (0usize, 0usize);
    let (mut pu, mut pt) = (0.0_f64, 0.0_f64);
    if dist(f.step_value(0), g.step_value(0)) > eps {
        return false;
    }
    for mv in route {
        match mv {
            Move::Right => {
                let u = a[i + 1];
                let lo = pt.max(b[j]).max(u - eps);
                let hi = b[j + 1].min(u + eps);
                let t = if u == t_end { t_end } else { lo };
                if t < lo || t > hi {
                    return false;
                }
                pu = u;
                pt = t;
                i += 1;
            }
            Move::Up => {
                let t = b[j + 1];
                let lo = pu.max(a[i]).max(t - eps);
                let hi = a[i + 1].min(t + eps);
                let u = if t == t_end { t_end } else { lo };
                if u < lo || u > hi {
                    return false;
                }
                pu = u;
                pt = t;
                j += 1;
            }
            Move::Diag => {
                let (u, t) = (a[i + 1], b[j + 1]);
                if (u - t).abs() > eps || ((u == t_end) != (t == t_end)) {
                    return false;
                }
                pu = u;
                pt = t;
                i += 1;
                j += 1;
            }
        }
        if dist(f.step_value(i), g.step_value(j)) > eps {
            return false;
        }
    }
    true
}

fn edges(p: &StepPath) -> Vec<f64> {
    let mut v = vec![0.0];
    v.extend_from_slice(p.epochs());
    v.push(p.horizon());
    v
}

pub fn j1_oracle(f: &StepPath, g: &StepPath) -> f64 {
    let (a, b) = (edges(f), edges(g));
    let mut cands = vec![0.0];
    for x in &a {
        for y in &b {
            cands.push((x - y).abs());
        }
    }
    for i in 0..=f.n_jumps() {
        for j in 0..=g.n_jumps() {
            cands.push(dist(f.step_value(i), g.step_value(j)));
        }
    }
    cands.sort_by(f64::total_cmp);
    cands.dedup();
    let mut best = f64::INFINITY;
    for r in routes(f.n_jumps() + 1, g.n_jumps() + 1) {
        // smallest candidate at which this route is feasible
        let (mut lo, mut hi) = (0usize, cands.len());
        while lo < hi {
            let mid = (lo + hi) / 2;
            if route_ok(f, g, &a, &b, &r, cands[mid]) {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        if lo < cands.len() {
            best = best.min(cands[lo]);
        }
    }
    best
}
