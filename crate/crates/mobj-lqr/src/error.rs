//! Error type shared across the library.

use thiserror::Error;

/// Errors produced by solvers, front sweeps, and diagnostic routines.
#[derive(Debug, Error)]
pub enum Error {
    /// Riccati iteration exhausted its budget. Signals a near-unstabilizable
    /// system or a tolerance tighter than the iteration can reach.
    #[error(
        "Riccati iteration did not converge in {max_iter} iterations (residual {residual:.3e})"
    )]
    NonConvergence { max_iter: usize, residual: f64 },

    /// Malformed solver input (dimension mismatch, non-symmetric or
    /// non-positive-definite cost matrix, ...).
    #[error("bad input: {0}")]
    BadInput(String),

    /// The inner matrix R + B'XB could not be inverted.
    #[error("inner matrix R + B'XB is singular")]
    SingularInnerMatrix,

    /// A closed loop (or plant) matrix has spectral radius >= 1, so the
    /// requested quantity is unbounded.
    #[error("matrix is not Schur stable (spectral radius {rho:.6})")]
    Unstable { rho: f64 },

    /// The growth rate tau(L, rho) is infinite because rho < rho(L).
    #[error("growth rate diverges: rho {rho:.6} below spectral radius {spectral_radius:.6}")]
    Diverging { rho: f64, spectral_radius: f64 },

    /// Cholesky factorization failed.
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    /// The requested weight net would exceed the point budget.
    #[error("epsilon-net with {points} points exceeds the budget of {budget}")]
    TooFine { points: u128, budget: u128 },

    /// No stabilizing gain among the brute-force candidates.
    #[error("no stabilizing gain in the candidate grid")]
    EmptyGrid,

    /// A Pareto front point violates the stabilizing invariant.
    #[error("front point {index} is unstable under the given dynamics")]
    UnstablePoint { index: usize },

    /// B (sum_j R_j)^-1 B' is singular, so the closed-form P_max bound is
    /// infinite for this problem.
    #[error("B (sum R_j)^-1 B' has a zero eigenvalue; closed-form P_max bound is infinite")]
    DegenerateB,

    /// A synthetically perturbed system left the stabilizable set.
    #[error("perturbed dynamics not stabilizable at epsilon {epsilon:.3e}")]
    PerturbedUnstabilizable { epsilon: f64 },

    /// Resampling could not produce stabilizable estimates.
    #[error("could not draw stabilizable dynamics estimates after {retries} retries")]
    CannotStabilize { retries: usize },

    /// Least-squares regressors do not span the state-input space.
    #[error("regressor matrix is rank deficient (rank {rank} < {need})")]
    RankDeficient { rank: usize, need: usize },

    /// Two fronts that must share a weight net do not.
    #[error("fronts are built over different weight nets")]
    NetMismatch,

    /// Incompatible dimensions between two user-supplied objects.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// Problem file could not be read or parsed.
    #[error("problem file error: {0}")]
    ProblemFile(String),
}

pub type Result<T> = std::result::Result<T, Error>;
