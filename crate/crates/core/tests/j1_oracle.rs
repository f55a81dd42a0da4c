mod support {
    pub mod j1_oracle;
}

use ctrw_core::paths::{j1_exact_small, j1_upper, StepPath};
use ctrw_core::RngStream;
use rand::Rng;
use support::j1_oracle::j1_oracle;

// Epochs on a coarse lattice so that ties, shared epochs and jumps at T occur.
fn random_path(rng: &mut RngStream, max_jumps: usize, lattice: bool) -> StepPath {
    let m = rng.random_range(0..=max_jumps);
    let mut times: Vec<f64> = (0..m)
        .map(|_| if lattice { rng.random_range(1..=10) as f64 / 10.0 } else { rng.random::<f64>() })
        .collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let sizes: Vec<f64> = times
        .iter()
        .map(|_| if lattice { rng.random_range(-2i32..=2) as f64 } else { rng.random::<f64>() * 4.0 - 2.0 })
        .collect();
    StepPath::from_jumps(1.0, vec![0.0], &times, &sizes).unwrap()
}

#[test]
fn exact_matches_route_enumeration() {
    let mut rng = RngStream::new(2024, 11);
    for k in 0..500 {
        let lattice = k % 2 == 0;
        let f = random_path(&mut rng, 6, lattice);
        let g = random_path(&mut rng, 6, lattice);
        let exact = j1_exact_small(&f, &g).unwrap();
        let oracle = j1_oracle(&f, &g);
        assert_eq!(exact, oracle, "pair {k}: {f:?} {g:?}");
        if f.n_jumps() == g.n_jumps() {
            assert!(exact <= j1_upper(&f, &g).unwrap());
        }
    }
}

#[test]
fn metric_axioms() {
    let mut rng = RngStream::new(7, 3);
    for _ in 0..1000 {
        let lattice = rng.random::<bool>();
        let (f, g, h) = (random_path(&mut rng, 5, lattice), random_path(&mut rng, 5, lattice), random_path(&mut rng, 5, lattice));
        let fg = j1_exact_small(&f, &g).unwrap();
        assert_eq!(fg, j1_exact_small(&g, &f).unwrap());
        assert_eq!(j1_exact_small(&f, &f).unwrap(), 0.0);
        let fh = j1_exact_small(&f, &h).unwrap();
        let hg = j1_exact_small(&h, &g).unwrap();
        assert!(fg <= fh + hg + 1e-9);
    }
}
