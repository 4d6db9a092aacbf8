use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};

use crate::survival::{Family, SurvivalDataset};

/// Proportional-hazards data with a linear signal in the first two covariates.
pub fn signal_data(family: Family, n: usize, p: usize, strength: f64, seed: u64) -> SurvivalDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = Array2::from_shape_fn((n, p), |_| match family {
        Family::TimeVarying => rng.random_range(-1.0..1.0),
        _ => rng.random_range(0.0..1.0),
    });
    let z: Option<Vec<f64>> =
        (family == Family::IndexVc).then(|| (0..n).map(|_| rng.random_range(0.0..1.0)).collect());
    let mut times = Vec::with_capacity(n);
    let mut status = Vec::with_capacity(n);
    for i in 0..n {
        let mut eta = strength * x[[i, 0]];
        if p > 1 {
            eta -= strength * x[[i, 1]] * x[[i, 1]];
        }
        if let Some(z) = &z {
            eta *= 1.0 + z[i];
        }
        let e: f64 = Exp1.sample(&mut rng);
        let t = 0.5 * e / eta.exp();
        let c = rng.random_range(0.2..1.5);
        times.push(t.min(c).max(1e-6));
        status.push(t <= c);
    }
    SurvivalDataset::new(times, status, x, z, family).unwrap()
}

pub fn random_vec(dim: usize, scale: f64, seed: u64) -> Array1<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array1::from_shape_fn(dim, |_| rng.random_range(-scale..scale))
}
