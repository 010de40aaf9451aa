//! Multi-objective discrete-time LQR: uniform Pareto-front approximation via
//! linear scalarization over an epsilon-net of the weight simplex, Riccati
//! perturbation diagnostics, and a certainty-equivalence pipeline for
//! estimated dynamics.
//!
//! Every Pareto-optimal linear feedback for a stabilizable plant with
//! positive definite objectives is the optimal control of a single-objective
//! problem with convexly combined cost matrices, so the front is swept by
//! solving one discrete algebraic Riccati equation per net weight. See the
//! module docs of [`solvers`], [`scalarization`], [`pareto`],
//! [`sensitivity`], and [`ce`] for the individual pieces, and [`benchmarks`]
//! for ready-made problems.

pub mod benchmarks;
pub mod ce;
pub mod error;
pub mod lqr;
pub mod pareto;
pub mod random;
pub mod scalarization;
pub mod sensitivity;
pub mod solvers;

pub use error::{Error, Result};
