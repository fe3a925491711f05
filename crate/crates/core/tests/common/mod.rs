#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use semsched_core::gauss_markov::spectral_decompose;
use semsched_core::LinearSystem;

pub const A1: [f64; 9] = [-0.04, 0.03, -0.05, -0.01, -0.06, 0.05, 0.2, 0.15, -0.4];
pub const D1: [f64; 9] = [4.0, 1.0, 3.0, 1.0, 0.25, 0.75, 3.0, 0.75, 2.25];
pub const A2: [f64; 4] = [-0.02, 0.0, 0.0, -0.03];
pub const D2: [f64; 4] = [0.7, 0.2, 0.2, 0.6];

pub fn stable_pair() -> Vec<LinearSystem> {
    vec![
        LinearSystem::from_rows(3, &A1, &D1).unwrap(),
        LinearSystem::from_rows(2, &A2, &D2).unwrap(),
    ]
}

pub fn unstable_pair() -> Vec<LinearSystem> {
    stable_pair().iter().map(LinearSystem::with_negated_drift).collect()
}

pub fn scalar() -> LinearSystem {
    LinearSystem::scalar(-0.5, 1.0).unwrap()
}

/// Gaussian drift with a random shift and a random-rank diffusion `B B^T`.
/// Draws again until the drift is comfortably diagonalizable.
pub fn random_system(rng: &mut ChaCha8Rng, dim: usize) -> LinearSystem {
    loop {
        let shift: f64 = rng.random_range(-1.0..0.6);
        let a = DMatrix::from_fn(dim, dim, |i, j| {
            let x: f64 = rng.sample(StandardNormal);
            0.4 * x + if i == j { shift } else { 0.0 }
        });
        let rank = rng.random_range(1..=dim);
        let b = DMatrix::from_fn(dim, rank, |_, _| rng.sample::<f64, _>(StandardNormal));
        let d = &b * b.transpose();
        let d = (&d + d.transpose()) * 0.5;
        let Ok(sys) = LinearSystem::new(a, d) else { continue };
        let Ok(spec) = spectral_decompose(&sys) else { continue };
        let lam = spec.eigvals();
        let resonant = lam
            .iter()
            .any(|x| lam.iter().any(|y| (x + y.conj()).norm() < 1e-3));
        if spec.condition() < 1e6 && !resonant {
            return sys;
        }
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}
