//! Problem representation and the LQR cost functional.
//!
//! Losses follow the trace convention: the canonical cost of a stabilizing
//! gain K is the expected cumulative cost from `x0 ~ N(0, I)`,
//!
//! ```text
//!   L(K, Q, R) = Tr(P_K),   P_K = dlyape((A+BK)', Q + K'RK),
//! ```
//!
//! which is the quantity every closed-form identity in this library refers
//! to. The time-averaged objective is 0 for any stabilizing gain in the
//! noiseless plant; [`simulate_cost`] exposes it as a mode for completeness,
//! with the cumulative mode (matching `Tr(P_K)`) as the default.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::solvers::{
    self, solve_dare, solve_dlyap, solve_dlyap_transposed, spectral_radius, DareOptions,
    DareSolution,
};

/// The pair (A, B) driving `x_{t+1} = A x_t + B u_t`.
///
/// Construction checks stabilizability by solving the DARE with identity
/// costs; the certificate is cheap and sufficient.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsModel {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
}

impl DynamicsModel {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self> {
        if !a.is_square() || a.nrows() == 0 {
            return Err(Error::BadInput("A must be square and non-empty".into()));
        }
        if b.nrows() != a.nrows() || b.ncols() == 0 {
            return Err(Error::BadInput("B must be n x d with d >= 1".into()));
        }
        if !a.iter().chain(b.iter()).all(|x| x.is_finite()) {
            return Err(Error::BadInput("dynamics entries must be finite".into()));
        }
        // Stabilizability certificate: the identity-cost DARE converges iff
        // (A, B) is stabilizable. NonConvergence propagates as the solver
        // failure it is.
        let eye_n = DMatrix::identity(a.nrows(), a.nrows());
        let eye_d = DMatrix::identity(b.ncols(), b.ncols());
        solve_dare(&a, &b, &eye_n, &eye_d, &DareOptions::default())?;
        Ok(DynamicsModel { a, b })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    /// State dimension n.
    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    /// Control dimension d.
    pub fn control_dim(&self) -> usize {
        self.b.ncols()
    }

    /// A + BK.
    pub fn closed_loop(&self, k: &DMatrix<f64>) -> DMatrix<f64> {
        &self.a + &self.b * k
    }

    /// True iff `rho(A + BK) < 1 - margin_tol`.
    pub fn stabilizes(&self, k: &DMatrix<f64>, margin_tol: f64) -> bool {
        solvers::is_stabilizing(&self.a, &self.b, k, margin_tol)
    }

    fn check_gain(&self, k: &DMatrix<f64>) -> Result<()> {
        if k.nrows() != self.control_dim() || k.ncols() != self.state_dim() {
            return Err(Error::DimensionMismatch(format!(
                "gain must be {} x {}",
                self.control_dim(),
                self.state_dim()
            )));
        }
        let rho = spectral_radius(&self.closed_loop(k));
        if rho >= 1.0 {
            return Err(Error::Unstable { rho });
        }
        Ok(())
    }
}

/// One quadratic objective (Q, R), positive definite with smallest singular
/// values at least one.
#[derive(Debug, Clone, PartialEq)]
pub struct CostObjective {
    pub label: String,
    q: DMatrix<f64>,
    r: DMatrix<f64>,
}

fn min_sym_eig(m: &DMatrix<f64>) -> f64 {
    m.clone().symmetric_eigen().eigenvalues.min()
}

fn check_cost_matrix(m: &DMatrix<f64>, name: &str) -> Result<f64> {
    if !m.is_square() {
        return Err(Error::BadInput(format!("{name} must be square")));
    }
    if (m - m.transpose()).norm() > 1e-10 * m.norm().max(1.0) {
        return Err(Error::BadInput(format!("{name} is not symmetric")));
    }
    Ok(min_sym_eig(m))
}

impl CostObjective {
    /// Validating constructor: rejects objectives whose smallest singular
    /// value falls below one.
    pub fn new(label: impl Into<String>, q: DMatrix<f64>, r: DMatrix<f64>) -> Result<Self> {
        let sq = check_cost_matrix(&q, "Q")?;
        let sr = check_cost_matrix(&r, "R")?;
        let floor = sq.min(sr);
        if floor < 1.0 - 1e-9 {
            return Err(Error::BadInput(format!(
                "objective needs sigma_min(Q), sigma_min(R) >= 1 (got {floor:.6}); \
                 use new_normalized to rescale"
            )));
        }
        Ok(CostObjective {
            label: label.into(),
            q,
            r,
        })
    }

    /// Rescale an objective whose singular-value floor is below one by
    /// `1 / min(sigma_min(Q), sigma_min(R))` and record the factor in the
    /// label. Rescaling does not change the optimal control.
    pub fn new_normalized(
        label: impl Into<String>,
        q: DMatrix<f64>,
        r: DMatrix<f64>,
    ) -> Result<Self> {
        let sq = check_cost_matrix(&q, "Q")?;
        let sr = check_cost_matrix(&r, "R")?;
        let floor = sq.min(sr);
        if floor <= 0.0 {
            return Err(Error::BadInput(
                "objective matrices must be positive definite".into(),
            ));
        }
        let mut label = label.into();
        let (q, r) = if floor < 1.0 {
            let scale = 1.0 / floor;
            label = format!("{label} (scaled by {scale:.6e})");
            (q * scale, r * scale)
        } else {
            (q, r)
        };
        Ok(CostObjective { label, q, r })
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }
}

/// A dynamics model together with m >= 1 cost objectives.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiObjectiveProblem {
    pub dynamics: DynamicsModel,
    objectives: Vec<CostObjective>,
}

impl MultiObjectiveProblem {
    pub fn new(dynamics: DynamicsModel, objectives: Vec<CostObjective>) -> Result<Self> {
        if objectives.is_empty() {
            return Err(Error::BadInput("need at least one objective".into()));
        }
        let n = dynamics.state_dim();
        let d = dynamics.control_dim();
        for (i, obj) in objectives.iter().enumerate() {
            if obj.q.nrows() != n || obj.r.nrows() != d {
                return Err(Error::DimensionMismatch(format!(
                    "objective {i} has Q {}x{} / R {}x{}, expected {n}x{n} / {d}x{d}",
                    obj.q.nrows(),
                    obj.q.ncols(),
                    obj.r.nrows(),
                    obj.r.ncols()
                )));
            }
        }
        Ok(MultiObjectiveProblem {
            dynamics,
            objectives,
        })
    }

    /// Number of objectives m.
    pub fn num_objectives(&self) -> usize {
        self.objectives.len()
    }

    pub fn objectives(&self) -> &[CostObjective] {
        &self.objectives
    }

    pub fn objective(&self, i: usize) -> &CostObjective {
        &self.objectives[i]
    }

    /// SHA-256 over dimensions and raw matrix bytes; identifies the problem
    /// in exported reports.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        let mut push_matrix = |m: &DMatrix<f64>| {
            hasher.update((m.nrows() as u64).to_le_bytes());
            hasher.update((m.ncols() as u64).to_le_bytes());
            for i in 0..m.nrows() {
                for j in 0..m.ncols() {
                    hasher.update(m[(i, j)].to_le_bytes());
                }
            }
        };
        push_matrix(self.dynamics.a());
        push_matrix(self.dynamics.b());
        for obj in &self.objectives {
            push_matrix(&obj.q);
            push_matrix(&obj.r);
        }
        let out = hasher.finalize();
        out.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Optimal gain for a single objective: `K = -(R + B'PB)^-1 B'PA` with
/// `P = dare(A, B, Q, R)`.
pub fn optimal_gain(
    dynamics: &DynamicsModel,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    opts: &DareOptions,
) -> Result<(DMatrix<f64>, DareSolution)> {
    let sol = solve_dare(dynamics.a(), dynamics.b(), q, r, opts)?;
    let k = gain_from_value(dynamics, &sol.p, r)?;
    Ok((k, sol))
}

/// `K = -(R + B'PB)^-1 B'PA` for a given value matrix P.
pub fn gain_from_value(
    dynamics: &DynamicsModel,
    p: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let b = dynamics.b();
    let pb = p * b;
    let inner = r + b.transpose() * &pb;
    let bpa = pb.transpose() * dynamics.a();
    let solved = match inner.clone().cholesky() {
        Some(chol) => chol.solve(&bpa),
        None => inner.lu().solve(&bpa).ok_or(Error::SingularInnerMatrix)?,
    };
    Ok(-solved)
}

/// Value matrix of a fixed stabilizing gain:
/// `P_K = dlyape((A+BK)', Q + K'RK)`.
pub fn value_matrix(
    dynamics: &DynamicsModel,
    k: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    dynamics.check_gain(k)?;
    let loop_matrix = dynamics.closed_loop(k);
    let mut cost = q + k.transpose() * r * k;
    let cost_t = cost.transpose();
    cost += cost_t;
    cost *= 0.5;
    solve_dlyap_transposed(&loop_matrix, &cost)
}

/// State Gramian of a stabilizing gain: `P_K^L = dlyape(A+BK, I)`, the sum of
/// state covariances from `x0 ~ N(0, I)`.
pub fn state_gramian(dynamics: &DynamicsModel, k: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    dynamics.check_gain(k)?;
    let loop_matrix = dynamics.closed_loop(k);
    let eye = DMatrix::identity(dynamics.state_dim(), dynamics.state_dim());
    solve_dlyap(&loop_matrix, &eye)
}

/// Cost via the value matrix: `Tr(P_K)`.
pub fn cost_via_value(
    dynamics: &DynamicsModel,
    k: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<f64> {
    Ok(value_matrix(dynamics, k, q, r)?.trace())
}

/// Cost via the state Gramian: `Tr((Q + K'RK) P_K^L)`. Agrees with
/// [`cost_via_value`]; the two routes are kept separate as a consistency
/// check.
pub fn cost_via_gramian(
    dynamics: &DynamicsModel,
    k: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<f64> {
    let gramian = state_gramian(dynamics, k)?;
    Ok(((q + k.transpose() * r * k) * gramian).trace())
}

/// Per-objective losses of one gain.
pub fn cost_vector(problem: &MultiObjectiveProblem, k: &DMatrix<f64>) -> Result<Vec<f64>> {
    problem
        .objectives
        .iter()
        .map(|obj| cost_via_value(&problem.dynamics, k, &obj.q, &obj.r))
        .collect()
}

/// Exact cost difference `L(K') - L(K)` evaluated without forming either
/// loss:
///
/// ```text
///   -2 Tr(P_K'^L (K - K')' E_K) + Tr(P_K'^L (K - K')' (R + B'P_K B) (K - K'))
/// ```
///
/// with `P_K'^L = dlyape(A+BK', I)`, `P_K = dlyape((A+BK)', Q + K'RK)` and
/// `E_K = (R + B'P_K B) K + B'P_K A`. This is an identity, not a bound; note
/// that `E_K` vanishes exactly at the optimal gain, consistent with
/// `K* = -(R + B'PB)^-1 B'PA` under the `u = Kx` sign convention used
/// throughout.
pub fn cost_difference_exact(
    dynamics: &DynamicsModel,
    k: &DMatrix<f64>,
    k_prime: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<f64> {
    let p_k = value_matrix(dynamics, k, q, r)?;
    let gram_prime = state_gramian(dynamics, k_prime)?;
    let b = dynamics.b();
    let inner = r + b.transpose() * &p_k * b;
    let e_k = &inner * k + b.transpose() * &p_k * dynamics.a();
    let dk = k - k_prime;
    let linear = -2.0 * (&gram_prime * dk.transpose() * &e_k).trace();
    let quadratic = (&gram_prime * dk.transpose() * &inner * &dk).trace();
    Ok(linear + quadratic)
}

/// Which functional [`simulate_cost`] estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CostMode {
    /// `E[sum_t x'Qx + u'Ru]`, the quantity equal to `Tr(P_K)`.
    #[default]
    Cumulative,
    /// `E[(1/T) sum_t x'Qx + u'Ru]`; tends to 0 for any stabilizing gain.
    TimeAveraged,
}

/// Monte Carlo estimate of the LQR cost from `x0 ~ N(0, I)`.
///
/// Returns `(estimate, standard_error)` over the requested rollouts. The RNG
/// is call-local and fully determined by the seed. There is no process noise
/// here; noise enters only as identification excitation in the
/// certainty-equivalence pipeline.
#[allow(clippy::too_many_arguments)]
pub fn simulate_cost(
    dynamics: &DynamicsModel,
    k: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    horizon: usize,
    rollouts: usize,
    mode: CostMode,
    seed: u64,
) -> Result<(f64, f64)> {
    let rng = &mut crate::random::rng_from_seed(seed);
    dynamics.check_gain(k)?;
    if horizon == 0 || rollouts == 0 {
        return Err(Error::BadInput("horizon and rollouts must be >= 1".into()));
    }
    let n = dynamics.state_dim();
    let loop_matrix = dynamics.closed_loop(k);
    let mut totals = Vec::with_capacity(rollouts);
    for _ in 0..rollouts {
        let mut x = DMatrix::<f64>::zeros(n, 1);
        for i in 0..n {
            x[(i, 0)] = rng.sample(StandardNormal);
        }
        let mut total = 0.0;
        for _ in 0..horizon {
            let u = k * &x;
            total += (x.transpose() * q * &x)[(0, 0)] + (u.transpose() * r * &u)[(0, 0)];
            x = &loop_matrix * x;
        }
        totals.push(match mode {
            CostMode::Cumulative => total,
            CostMode::TimeAveraged => total / horizon as f64,
        });
    }
    let mean = totals.iter().sum::<f64>() / rollouts as f64;
    let var = totals.iter().map(|t| (t - mean).powi(2)).sum::<f64>()
        / (rollouts.saturating_sub(1).max(1)) as f64;
    Ok((mean, (var / rollouts as f64).sqrt()))
}

// ---------------------------------------------------------------------------
// Problem file format
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct ObjectiveFile {
    label: String,
    #[serde(rename = "Q")]
    q: Vec<Vec<f64>>,
    #[serde(rename = "R")]
    r: Vec<Vec<f64>>,
}

/// On-disk JSON schema: `A` and `B` as row-major nested arrays plus a list of
/// labelled objectives.
#[derive(Debug, Serialize, Deserialize)]
pub struct ProblemFile {
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    b: Vec<Vec<f64>>,
    objectives: Vec<ObjectiveFile>,
}

fn rows_to_matrix(rows: &[Vec<f64>], name: &str) -> Result<DMatrix<f64>> {
    if rows.is_empty() {
        return Err(Error::ProblemFile(format!("{name} has no rows")));
    }
    let cols = rows[0].len();
    if cols == 0 || rows.iter().any(|r| r.len() != cols) {
        return Err(Error::ProblemFile(format!(
            "{name} rows have uneven length"
        )));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok(DMatrix::from_row_slice(rows.len(), cols, &flat))
}

fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

impl ProblemFile {
    pub fn from_problem(problem: &MultiObjectiveProblem) -> Self {
        ProblemFile {
            a: matrix_to_rows(problem.dynamics.a()),
            b: matrix_to_rows(problem.dynamics.b()),
            objectives: problem
                .objectives
                .iter()
                .map(|o| ObjectiveFile {
                    label: o.label.clone(),
                    q: matrix_to_rows(&o.q),
                    r: matrix_to_rows(&o.r),
                })
                .collect(),
        }
    }

    /// Validate and convert into a problem. `normalize` rescales objectives
    /// whose singular-value floor is below one instead of rejecting them.
    pub fn into_problem(self, normalize: bool) -> Result<MultiObjectiveProblem> {
        let a = rows_to_matrix(&self.a, "A")?;
        let b = rows_to_matrix(&self.b, "B")?;
        let dynamics = DynamicsModel::new(a, b)?;
        let objectives = self
            .objectives
            .into_iter()
            .map(|o| {
                let q = rows_to_matrix(&o.q, "Q")?;
                let r = rows_to_matrix(&o.r, "R")?;
                if normalize {
                    CostObjective::new_normalized(o.label, q, r)
                } else {
                    CostObjective::new(o.label, q, r)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        MultiObjectiveProblem::new(dynamics, objectives)
    }
}

/// Parse a problem from JSON text.
pub fn problem_from_json(text: &str, normalize: bool) -> Result<MultiObjectiveProblem> {
    let file: ProblemFile =
        serde_json::from_str(text).map_err(|e| Error::ProblemFile(e.to_string()))?;
    file.into_problem(normalize)
}

/// Serialize a problem to JSON text.
pub fn problem_to_json(problem: &MultiObjectiveProblem) -> String {
    serde_json::to_string_pretty(&ProblemFile::from_problem(problem))
        .expect("problem serialization cannot fail")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_dynamics, random_spd, rng_from_seed};

    fn mat(rows: usize, cols: usize, data: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(rows, cols, data)
    }

    fn scalar_dynamics(a: f64, b: f64) -> DynamicsModel {
        DynamicsModel::new(mat(1, 1, &[a]), mat(1, 1, &[b])).unwrap()
    }

    fn unit_objective(n: usize, d: usize) -> (DMatrix<f64>, DMatrix<f64>) {
        (DMatrix::identity(n, n), DMatrix::identity(d, d))
    }

    #[test]
    fn construction_rejects_unstabilizable_pairs() {
        let out = DynamicsModel::new(mat(1, 1, &[2.0]), mat(1, 1, &[0.0]));
        assert!(matches!(out, Err(Error::NonConvergence { .. })));
        assert!(DynamicsModel::new(mat(1, 1, &[2.0]), mat(1, 1, &[1.0])).is_ok());
    }

    #[test]
    fn objective_floor_enforced_and_normalized() {
        let q = mat(1, 1, &[0.5]);
        let r = mat(1, 1, &[2.0]);
        assert!(CostObjective::new("too small", q.clone(), r.clone()).is_err());
        let normalized = CostObjective::new_normalized("scaled", q, r).unwrap();
        assert!((normalized.q()[(0, 0)] - 1.0).abs() < 1e-12);
        assert!((normalized.r()[(0, 0)] - 4.0).abs() < 1e-12);
        assert!(normalized.label.contains("scaled by"));
    }

    #[test]
    fn optimal_gain_zero_dynamics() {
        let dynamics = scalar_dynamics(0.0, 1.0);
        let (q, r) = unit_objective(1, 1);
        let (k, sol) = optimal_gain(&dynamics, &q, &r, &DareOptions::default()).unwrap();
        assert!(k[(0, 0)].abs() < 1e-14);
        assert!((sol.p[(0, 0)] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn optimal_gain_golden_ratio() {
        let dynamics = scalar_dynamics(1.0, 1.0);
        let (q, r) = unit_objective(1, 1);
        let (k, _) = optimal_gain(&dynamics, &q, &r, &DareOptions::default()).unwrap();
        // -p/(1+p) at the golden-ratio p.
        assert!(
            (k[(0, 0)] + 0.6180339887498949).abs() < 1e-12,
            "K = {}",
            k[(0, 0)]
        );
        assert!(dynamics.stabilizes(&k, 0.0));
    }

    #[test]
    fn optimal_gain_heavy_penalty_stays_stable() {
        let dynamics = scalar_dynamics(0.9, 1.0);
        let q = mat(1, 1, &[1.0]);
        let r = mat(1, 1, &[10.0]);
        let (k, _) = optimal_gain(&dynamics, &q, &r, &DareOptions::default()).unwrap();
        assert!(k[(0, 0)] < 0.0 && k[(0, 0)] > -0.9, "K = {}", k[(0, 0)]);
        assert!(dynamics.stabilizes(&k, 0.0));
    }

    #[test]
    fn cost_scalar_oracles() {
        // A = 0.5, K = 0: geometric series 1/(1 - 0.25).
        let dynamics = scalar_dynamics(0.5, 1.0);
        let (q, r) = unit_objective(1, 1);
        let k0 = mat(1, 1, &[0.0]);
        let expected = 4.0 / 3.0;
        assert!((cost_via_value(&dynamics, &k0, &q, &r).unwrap() - expected).abs() < 1e-12);
        assert!((cost_via_gramian(&dynamics, &k0, &q, &r).unwrap() - expected).abs() < 1e-12);
        // A = 0: one step of cost only.
        let dynamics = scalar_dynamics(0.0, 1.0);
        assert!((cost_via_value(&dynamics, &k0, &q, &r).unwrap() - 1.0).abs() < 1e-14);
        assert!((cost_via_gramian(&dynamics, &k0, &q, &r).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn cost_at_optimum_equals_trace_of_dare() {
        let dynamics = scalar_dynamics(1.0, 1.0);
        let (q, r) = unit_objective(1, 1);
        let (k, sol) = optimal_gain(&dynamics, &q, &r, &DareOptions::default()).unwrap();
        let via_value = cost_via_value(&dynamics, &k, &q, &r).unwrap();
        assert!((via_value - sol.p.trace()).abs() < 1e-10 * sol.p.trace());
    }

    #[test]
    fn cost_rejects_destabilizing_gain() {
        let dynamics = scalar_dynamics(1.0, 1.0);
        let (q, r) = unit_objective(1, 1);
        let out = cost_via_value(&dynamics, &mat(1, 1, &[0.0]), &q, &r);
        assert!(matches!(out, Err(Error::Unstable { .. })));
    }

    #[test]
    fn representation_equivalence_random_gains() {
        let mut rng = rng_from_seed(21);
        let opts = DareOptions::default();
        for _ in 0..20 {
            let (a, b) = random_dynamics(4, 2, 0.9, &mut rng);
            let dynamics = DynamicsModel::new(a, b).unwrap();
            let q = random_spd(4, &mut rng);
            let r = random_spd(2, &mut rng);
            // Perturb the optimal gain but keep it stabilizing.
            let (k_star, _) = optimal_gain(&dynamics, &q, &r, &opts).unwrap();
            let k = loop {
                let delta = crate::random::standard_normal_matrix(2, 4, &mut rng) * 0.05;
                let candidate = &k_star + delta;
                if dynamics.stabilizes(&candidate, 0.0) {
                    break candidate;
                }
            };
            let via_value = cost_via_value(&dynamics, &k, &q, &r).unwrap();
            let via_gramian = cost_via_gramian(&dynamics, &k, &q, &r).unwrap();
            let rel = (via_value - via_gramian).abs() / via_value.abs().max(1.0);
            assert!(rel < 1e-10, "representations differ by {rel}");
        }
    }

    #[test]
    fn local_optimality_of_the_gain() {
        let mut rng = rng_from_seed(33);
        let opts = DareOptions::default();
        let (a, b) = random_dynamics(3, 2, 0.9, &mut rng);
        let dynamics = DynamicsModel::new(a, b).unwrap();
        let q = random_spd(3, &mut rng);
        let r = random_spd(2, &mut rng);
        let (k_star, _) = optimal_gain(&dynamics, &q, &r, &opts).unwrap();
        let best = cost_via_value(&dynamics, &k_star, &q, &r).unwrap();
        for _ in 0..30 {
            let delta = crate::random::standard_normal_matrix(2, 3, &mut rng) * 0.02;
            let k = &k_star + delta;
            if dynamics.stabilizes(&k, 0.0) {
                let cost = cost_via_value(&dynamics, &k, &q, &r).unwrap();
                assert!(
                    cost >= best - 1e-10,
                    "perturbed cost {cost} below optimum {best}"
                );
            }
        }
    }

    #[test]
    fn cost_difference_identity_scalar() {
        let dynamics = scalar_dynamics(0.5, 1.0);
        let (q, r) = unit_objective(1, 1);
        let k = mat(1, 1, &[0.0]);
        let k_prime = mat(1, 1, &[-0.1]);
        // Identity vanishes at equal gains.
        assert!(
            cost_difference_exact(&dynamics, &k, &k, &q, &r)
                .unwrap()
                .abs()
                < 1e-14
        );
        let direct = cost_via_value(&dynamics, &k_prime, &q, &r).unwrap()
            - cost_via_value(&dynamics, &k, &q, &r).unwrap();
        let identity = cost_difference_exact(&dynamics, &k, &k_prime, &q, &r).unwrap();
        assert!(
            (identity - direct).abs() < 1e-10,
            "identity {identity} vs direct {direct}"
        );
    }

    #[test]
    fn cost_difference_identity_random_pairs() {
        let mut rng = rng_from_seed(55);
        let opts = DareOptions::default();
        for _ in 0..20 {
            let (a, b) = random_dynamics(3, 2, 0.9, &mut rng);
            let dynamics = DynamicsModel::new(a, b).unwrap();
            let q = random_spd(3, &mut rng);
            let r = random_spd(2, &mut rng);
            let (k_star, _) = optimal_gain(&dynamics, &q, &r, &opts).unwrap();
            let draw_gain = |rng: &mut rand_chacha::ChaCha12Rng| loop {
                let delta = crate::random::standard_normal_matrix(2, 3, rng) * 0.05;
                let candidate = &k_star + delta;
                if dynamics.stabilizes(&candidate, 0.0) {
                    return candidate;
                }
            };
            let k = draw_gain(&mut rng);
            let k_prime = draw_gain(&mut rng);
            let direct = cost_via_value(&dynamics, &k_prime, &q, &r).unwrap()
                - cost_via_value(&dynamics, &k, &q, &r).unwrap();
            let identity = cost_difference_exact(&dynamics, &k, &k_prime, &q, &r).unwrap();
            let rel = (identity - direct).abs() / direct.abs().max(1.0);
            assert!(rel < 1e-8, "identity off by {rel}");
        }
    }

    #[test]
    fn simulate_cumulative_matches_trace_formula() {
        let dynamics = scalar_dynamics(0.5, 1.0);
        let (q, r) = unit_objective(1, 1);
        let k0 = mat(1, 1, &[0.0]);
        let (estimate, stderr) =
            simulate_cost(&dynamics, &k0, &q, &r, 200, 4000, CostMode::Cumulative, 77).unwrap();
        let expected = 4.0 / 3.0;
        assert!(
            (estimate - expected).abs() <= 3.0 * stderr,
            "estimate {estimate} +- {stderr} vs {expected}"
        );
    }

    #[test]
    fn simulate_time_average_vanishes() {
        let dynamics = scalar_dynamics(0.5, 1.0);
        let (q, r) = unit_objective(1, 1);
        let k0 = mat(1, 1, &[0.0]);
        let horizon = 10_000;
        let (estimate, _) = simulate_cost(
            &dynamics,
            &k0,
            &q,
            &r,
            horizon,
            200,
            CostMode::TimeAveraged,
            78,
        )
        .unwrap();
        // The transient contributes Tr(P_K)/T on average.
        assert!(
            estimate.abs() < 10.0 * (4.0 / 3.0) / horizon as f64,
            "time-averaged estimate {estimate}"
        );
    }

    #[test]
    fn problem_json_round_trip() {
        let dynamics = scalar_dynamics(0.9, 1.0);
        let problem = MultiObjectiveProblem::new(
            dynamics,
            vec![
                CostObjective::new("state", mat(1, 1, &[1.0]), mat(1, 1, &[1.0])).unwrap(),
                CostObjective::new("control", mat(1, 1, &[1.0]), mat(1, 1, &[10.0])).unwrap(),
            ],
        )
        .unwrap();
        let text = problem_to_json(&problem);
        let parsed = problem_from_json(&text, false).unwrap();
        assert_eq!(parsed.num_objectives(), 2);
        assert_eq!(parsed.dynamics.state_dim(), 1);
        assert_eq!(parsed.digest(), problem.digest());
    }

    #[test]
    fn problem_json_rejects_garbage() {
        assert!(matches!(
            problem_from_json("{not json", false),
            Err(Error::ProblemFile(_))
        ));
        let uneven = r#"{"A": [[1.0, 0.0]], "B": [[1.0]], "objectives": []}"#;
        assert!(problem_from_json(uneven, false).is_err());
    }
}
