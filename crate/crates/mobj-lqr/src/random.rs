//! Seeded random matrix and simplex sampling helpers.
//!
//! Everything here is deterministic given a 64-bit seed; the library never
//! touches OS entropy. ChaCha keeps streams identical across platforms.

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::solvers::spectral_norm;

/// Deterministic RNG for a given seed.
pub fn rng_from_seed(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}

/// Matrix with i.i.d. standard normal entries, filled row by row.
pub fn standard_normal_matrix(rows: usize, cols: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            m[(i, j)] = rng.sample(StandardNormal);
        }
    }
    m
}

/// Gaussian direction normalized to spectral norm one.
///
/// With `symmetric` set (square shapes only) the draw is projected to its
/// symmetric part before normalization, which is the right notion of
/// direction for Q/R perturbations.
pub fn unit_spectral_direction(
    rows: usize,
    cols: usize,
    symmetric: bool,
    rng: &mut impl Rng,
) -> DMatrix<f64> {
    loop {
        let mut g = standard_normal_matrix(rows, cols, rng);
        if symmetric {
            assert_eq!(rows, cols, "symmetric direction needs a square shape");
            g = (&g + g.transpose()) * 0.5;
        }
        let norm = spectral_norm(&g);
        if norm > 1e-12 {
            return g / norm;
        }
    }
}

/// Random symmetric positive definite matrix with smallest eigenvalue >= 1.
pub fn random_spd(n: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    let w = standard_normal_matrix(n, n, rng);
    (&w * w.transpose()) / (n as f64) + DMatrix::identity(n, n)
}

/// Random dynamics pair (A, B) with A rescaled to the requested spectral
/// radius. A Gaussian B makes (A, B) controllable almost surely, hence
/// stabilizable regardless of `target_rho`.
pub fn random_dynamics(
    n: usize,
    d: usize,
    target_rho: f64,
    rng: &mut impl Rng,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let mut a = standard_normal_matrix(n, n, rng);
    let rho = crate::solvers::spectral_radius(&a);
    if rho > 1e-12 {
        a *= target_rho / rho;
    }
    let b = standard_normal_matrix(n, d, rng);
    (a, b)
}

/// Uniform sample from the probability simplex: normalized Exp(1) draws
/// (symmetric Dirichlet with unit concentration).
pub fn sample_simplex(m: usize, rng: &mut impl Rng) -> Vec<f64> {
    assert!(m >= 1);
    loop {
        let draws: Vec<f64> = (0..m)
            .map(|_| {
                let u: f64 = rng.random();
                -(1.0 - u).ln()
            })
            .collect();
        let total: f64 = draws.iter().sum();
        if total > 0.0 {
            return draws.iter().map(|e| e / total).collect();
        }
    }
}
