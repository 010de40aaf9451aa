//! Dense matrix-equation solvers and spectral utilities.
//!
//! The discrete algebraic Riccati equation (DARE)
//!
//! ```text
//!   P = A'PA - A'PB (R + B'PB)^-1 B'PA + Q
//! ```
//!
//! is solved by fixed-point iteration of the Riccati map starting at P = Q,
//! with a structured doubling algorithm available as an accelerated
//! alternative. Convergence is declared on the residual
//!
//! ```text
//!   F(X) = X - A'XA + A'XB (R + B'XB)^-1 B'XA - Q
//! ```
//!
//! measured in spectral norm against `tol * max(1, ||P||)`.
//!
//! The discrete Lyapunov equation `P = A P A' + Q` is solved by squaring
//! (accumulate `sum_k A^k Q (A')^k` while repeatedly squaring `A`), which
//! converges quadratically whenever `rho(A) < 1`. Both orientations are
//! exposed since value matrices use `P = A'PA + Q` while state Gramians use
//! `P = APA' + Q`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Spectral radius: largest eigenvalue modulus.
pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    assert!(m.is_square(), "spectral radius needs a square matrix");
    m.complex_eigenvalues()
        .iter()
        .map(|e| e.norm())
        .fold(0.0, f64::max)
}

/// Spectral (operator) norm: largest singular value.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.clone().singular_values().max()
}

/// True iff `rho(A + BK) < 1 - margin_tol`.
///
/// `margin_tol = 0` is the textbook stabilizing test; downstream stability
/// audits pass a positive margin when they want slack against perturbation.
pub fn is_stabilizing(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    k: &DMatrix<f64>,
    margin_tol: f64,
) -> bool {
    spectral_radius(&(a + b * k)) < 1.0 - margin_tol
}

/// Solution of a DARE together with its convergence evidence.
#[derive(Debug, Clone)]
pub struct DareSolution {
    /// Symmetric positive definite solution.
    pub p: DMatrix<f64>,
    /// Spectral norm of the Riccati residual F(P) at the returned P.
    pub residual_norm: f64,
    /// Iterations spent (fixed-point steps or doubling steps).
    pub iterations: usize,
}

/// Algorithm choice for [`solve_dare`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DareAlgorithm {
    /// Fixed-point iteration of the Riccati map from P = Q. Linear rate
    /// `rho(A+BK)^2`; ample for the dense, small systems targeted here.
    #[default]
    FixedPoint,
    /// Structured doubling; quadratic rate, used as a cross-check and for
    /// stiff instances.
    Doubling,
}

/// Tolerances and budget for [`solve_dare`].
#[derive(Debug, Clone, Copy)]
pub struct DareOptions {
    /// Residual tolerance, relative to `max(1, ||P||)`.
    pub tol: f64,
    /// Iteration budget.
    pub max_iter: usize,
    pub algorithm: DareAlgorithm,
}

impl Default for DareOptions {
    fn default() -> Self {
        DareOptions {
            tol: 1e-12,
            max_iter: 10_000,
            algorithm: DareAlgorithm::FixedPoint,
        }
    }
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let t = m.transpose();
    *m += t;
    *m *= 0.5;
}

fn check_symmetric(m: &DMatrix<f64>, name: &str) -> Result<()> {
    if !m.is_square() {
        return Err(Error::BadInput(format!("{name} must be square")));
    }
    let scale = m.norm().max(1.0);
    if (m - m.transpose()).norm() > 1e-10 * scale {
        return Err(Error::BadInput(format!("{name} is not symmetric")));
    }
    Ok(())
}

fn check_spd(m: &DMatrix<f64>, name: &str) -> Result<()> {
    check_symmetric(m, name)?;
    let min_eig = m.clone().symmetric_eigen().eigenvalues.min();
    if min_eig <= 0.0 {
        return Err(Error::BadInput(format!(
            "{name} is not positive definite (min eigenvalue {min_eig:.3e})"
        )));
    }
    Ok(())
}

fn check_dare_shapes(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<()> {
    let n = a.nrows();
    if !a.is_square() {
        return Err(Error::BadInput("A must be square".into()));
    }
    if b.nrows() != n {
        return Err(Error::BadInput("B must have as many rows as A".into()));
    }
    let d = b.ncols();
    if q.nrows() != n || q.ncols() != n {
        return Err(Error::BadInput("Q must be n x n".into()));
    }
    if r.nrows() != d || r.ncols() != d {
        return Err(Error::BadInput("R must be d x d".into()));
    }
    check_spd(q, "Q")?;
    check_spd(r, "R")?;
    Ok(())
}

/// One application of the Riccati map `X -> A'XA - A'XB(R+B'XB)^-1 B'XA + Q`.
fn riccati_map(
    x: &DMatrix<f64>,
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let xb = x * b;
    let inner = r + b.transpose() * &xb;
    let bxa = xb.transpose() * a;
    let solved = match inner.clone().cholesky() {
        Some(chol) => chol.solve(&bxa),
        None => inner.lu().solve(&bxa).ok_or(Error::SingularInnerMatrix)?,
    };
    let mut next = a.transpose() * x * a - bxa.transpose() * solved + q;
    symmetrize(&mut next);
    Ok(next)
}

/// Unique positive semidefinite solution of the DARE for stabilizable (A, B)
/// and positive definite Q, R.
///
/// Errors with [`Error::NonConvergence`] when the iteration budget runs out
/// (near-unstabilizable input or an unreachable tolerance) and with
/// [`Error::BadInput`] for non-symmetric or non-positive-definite Q/R.
pub fn solve_dare(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    opts: &DareOptions,
) -> Result<DareSolution> {
    check_dare_shapes(a, b, q, r)?;
    match opts.algorithm {
        DareAlgorithm::FixedPoint => solve_dare_fixed_point(a, b, q, r, opts),
        DareAlgorithm::Doubling => solve_dare_doubling(a, b, q, r, opts),
    }
}

fn solve_dare_fixed_point(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    opts: &DareOptions,
) -> Result<DareSolution> {
    let mut p = q.clone();
    let mut step = f64::INFINITY;
    for it in 1..=opts.max_iter {
        let next = riccati_map(&p, a, b, q, r)?;
        step = (&next - &p).norm();
        p = next;
        if !p.iter().all(|x| x.is_finite()) {
            return Err(Error::NonConvergence {
                max_iter: it,
                residual: f64::INFINITY,
            });
        }
        // The Frobenius step bounds the spectral residual of the previous
        // iterate; confirm against the contract before returning.
        if step <= 0.5 * opts.tol * p.norm().max(1.0) {
            let residual = dare_residual(&p, a, b, q, r)?;
            if residual <= opts.tol * spectral_norm(&p).max(1.0) {
                return Ok(DareSolution {
                    p,
                    residual_norm: residual,
                    iterations: it,
                });
            }
        }
    }
    Err(Error::NonConvergence {
        max_iter: opts.max_iter,
        residual: step,
    })
}

/// Structured doubling: H_k converges quadratically to the DARE solution.
fn solve_dare_doubling(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    opts: &DareOptions,
) -> Result<DareSolution> {
    let n = a.nrows();
    let r_inv_bt = r
        .clone()
        .cholesky()
        .ok_or(Error::SingularInnerMatrix)?
        .solve(&b.transpose());
    let mut ak = a.clone();
    let mut gk = b * r_inv_bt;
    let mut hk = q.clone();
    symmetrize(&mut gk);
    let eye = DMatrix::<f64>::identity(n, n);
    for it in 1..=opts.max_iter.min(200) {
        let w = &eye + &gk * &hk;
        let lu = w.lu();
        let wa = lu.solve(&ak).ok_or(Error::SingularInnerMatrix)?;
        let wg = lu.solve(&gk).ok_or(Error::SingularInnerMatrix)?;
        let a_next = &ak * &wa;
        let mut g_next = &gk + &ak * &wg * ak.transpose();
        let mut h_next = &hk + ak.transpose() * &hk * &wa;
        symmetrize(&mut g_next);
        symmetrize(&mut h_next);
        let step = (&h_next - &hk).norm();
        ak = a_next;
        gk = g_next;
        hk = h_next;
        if !hk.iter().all(|x| x.is_finite()) || hk.norm() > 1e150 {
            return Err(Error::NonConvergence {
                max_iter: it,
                residual: f64::INFINITY,
            });
        }
        if step <= 0.5 * opts.tol * hk.norm().max(1.0) {
            let residual = dare_residual(&hk, a, b, q, r)?;
            if residual <= opts.tol * spectral_norm(&hk).max(1.0) {
                return Ok(DareSolution {
                    p: hk,
                    residual_norm: residual,
                    iterations: it,
                });
            }
        }
    }
    Err(Error::NonConvergence {
        max_iter: opts.max_iter.min(200),
        residual: f64::NAN,
    })
}

/// Spectral norm of the Riccati residual
/// `F(P) = P - A'PA + A'PB(R+B'PB)^-1 B'PA - Q`.
pub fn dare_residual(
    p: &DMatrix<f64>,
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<f64> {
    let pb = p * b;
    let inner = r + b.transpose() * &pb;
    let bpa = pb.transpose() * a;
    let solved = match inner.clone().cholesky() {
        Some(chol) => chol.solve(&bpa),
        None => inner.lu().solve(&bpa).ok_or(Error::SingularInnerMatrix)?,
    };
    let f = p - a.transpose() * p * a + bpa.transpose() * solved - q;
    Ok(spectral_norm(&f))
}

/// Solve `P = A P A' + Q` for Schur-stable A (state-Gramian orientation).
///
/// Squaring scheme: with `S <- S + M S M'` and `M <- M^2` the partial sum
/// after j rounds equals `sum_{k < 2^j} A^k Q (A')^k`, and the truncation
/// error is `M_j P M_j'`, driven to zero quadratically.
pub fn solve_dlyap(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_symmetric(q, "Q")?;
    let min_eig = q.clone().symmetric_eigen().eigenvalues.min();
    if min_eig < -1e-10 * q.norm().max(1.0) {
        return Err(Error::BadInput("Q must be positive semidefinite".into()));
    }
    let rho = spectral_radius(a);
    if rho >= 1.0 {
        return Err(Error::Unstable { rho });
    }
    let mut s = q.clone();
    let mut m = a.clone();
    for _ in 0..200 {
        s = &s + &m * &s * m.transpose();
        symmetrize(&mut s);
        m = &m * &m;
        if !s.iter().all(|x| x.is_finite()) {
            return Err(Error::Unstable { rho });
        }
        let tail = m.norm();
        if tail * tail * s.norm() <= 1e-17 * s.norm().max(1.0) {
            break;
        }
    }
    Ok(s)
}

/// Solve `P = A'PA + Q` (value-matrix orientation), i.e. `dlyape(A', Q)`.
pub fn solve_dlyap_transposed(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    solve_dlyap(&a.transpose(), q)
}

/// Growth rate `tau(L, rho) = sup_k ||L^k|| rho^-k` together with its scan
/// evidence.
#[derive(Debug, Clone)]
pub struct GrowthRate {
    /// The supremum over the scanned range (the exact supremum when
    /// `tail_certified` is set).
    pub tau: f64,
    /// The rho the supremum was taken against.
    pub rho: f64,
    /// Last power of L that was examined.
    pub k_truncation: usize,
    /// True when the scan proves the supremum is attained within
    /// `k_truncation` powers.
    pub tail_certified: bool,
}

/// Scan `||L^k|| rho^-k` for `k <= k_max`.
///
/// Termination: as soon as some k has `||L^k||^(1/k) < rho`, equivalently
/// `t_k = ||L^k|| rho^-k < 1`, submultiplicativity gives
/// `t_(qk+s) <= t_k^q t_s <= max_(s<k) t_s`, so the supremum over all powers
/// is attained in the scanned prefix and the tail is certified. Gelfand's
/// formula guarantees this happens eventually whenever `rho > rho(L)`; for
/// `rho < rho(L)` the supremum is infinite and the call fails with
/// [`Error::Diverging`].
pub fn growth_rate_tau(l: &DMatrix<f64>, rho: f64, k_max: usize) -> Result<GrowthRate> {
    if !rho.is_finite() || rho <= 0.0 {
        return Err(Error::BadInput("rho must be positive and finite".into()));
    }
    let sr = spectral_radius(l);
    // tau is finite at rho = rho(L) for normal L (and is then just the scan
    // max), so only strictly smaller rho is rejected.
    if rho < sr * (1.0 - 1e-12) {
        return Err(Error::Diverging {
            rho,
            spectral_radius: sr,
        });
    }
    let n = l.nrows();
    let ln_rho = rho.ln();
    // Track L^k with a running log-scale so large transients cannot overflow.
    let mut power = DMatrix::<f64>::identity(n, n);
    let mut log_scale = 0.0_f64;
    let mut best_log_tau = 0.0_f64; // k = 0 term is exactly 1
    let mut k_truncation = 0;
    let mut tail_certified = false;
    for k in 1..=k_max {
        power = &power * l;
        let fnorm = power.norm();
        if !(1e-100..=1e100).contains(&fnorm) {
            if fnorm <= 0.0 {
                // Nilpotent: all later powers vanish, supremum attained.
                k_truncation = k;
                tail_certified = true;
                break;
            }
            power /= fnorm;
            log_scale += fnorm.ln();
        }
        let log_t = spectral_norm(&power).ln() + log_scale - (k as f64) * ln_rho;
        k_truncation = k;
        if log_t > best_log_tau {
            best_log_tau = log_t;
        }
        if log_t < 0.0 {
            tail_certified = true;
            break;
        }
    }
    Ok(GrowthRate {
        tau: best_log_tau.exp(),
        rho,
        k_truncation,
        tail_certified,
    })
}

/// Fold R into B: returns `B L^-T` where `R = L L'` is the Cholesky
/// factorization, so that `dare(A, B, Q, R) = dare(A, B L^-T, Q, I)`.
pub fn reduce_to_identity_cost(b: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let chol = r.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
    let l = chol.l();
    // X = B L^-T  <=>  L X' = B'
    let xt = l
        .solve_lower_triangular(&b.transpose())
        .ok_or(Error::NotPositiveDefinite)?;
    Ok(xt.transpose())
}
