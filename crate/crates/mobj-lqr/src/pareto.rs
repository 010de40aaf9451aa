//! Pareto front approximation over a weight net, dominance logic, the
//! brute-force oracle, and the lifting-map feasibility verifier.
//!
//! `approximate_front` keeps the full image of the net: the approximate front
//! is defined as one optimal gain per net weight, and dominance filtering is
//! a separate presentation step. A solver failure at one weight is recorded
//! and the sweep continues, so a long run never loses completed work.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lqr::{cost_vector, CostObjective, DynamicsModel, MultiObjectiveProblem};
use crate::scalarization::{epsilon_net, solve_scalarized, WeightNet, WeightVector};
use crate::solvers::{solve_dlyap, spectral_radius, DareOptions, DareSolution};

/// One scalarization solve: weight, optimal gain, Riccati solution, and the
/// per-objective losses of that gain.
#[derive(Debug, Clone)]
pub struct ParetoPoint {
    pub weight: WeightVector,
    pub gain: DMatrix<f64>,
    pub dare: DareSolution,
    pub losses: Vec<f64>,
}

impl ParetoPoint {
    /// The weighted loss `w' L(K)`; equals `Tr(P_w)` up to solver tolerance.
    pub fn scalarized_loss(&self) -> f64 {
        self.weight.dot(&self.losses)
    }
}

/// A weight at which the sweep failed, with the solver message.
#[derive(Debug, Clone)]
pub struct FrontFailure {
    pub net_index: usize,
    pub weight: WeightVector,
    pub message: String,
}

/// The approximate Pareto front: the image of the whole net, in net order.
#[derive(Debug, Clone)]
pub struct ParetoFrontApprox {
    pub epsilon: f64,
    pub net: WeightNet,
    /// Successful solves, ordered by net index.
    pub points: Vec<ParetoPoint>,
    /// Net index of each entry of `points`.
    pub net_indices: Vec<usize>,
    pub failures: Vec<FrontFailure>,
    pub problem_digest: String,
}

impl ParetoFrontApprox {
    /// True when every net weight produced a point.
    pub fn is_complete(&self) -> bool {
        self.failures.is_empty()
    }

    /// Point solved at a given net index, if that solve succeeded.
    pub fn point_at_net_index(&self, net_index: usize) -> Option<&ParetoPoint> {
        self.net_indices
            .binary_search(&net_index)
            .ok()
            .map(|pos| &self.points[pos])
    }
}

/// Knobs for [`approximate_front`].
#[derive(Debug, Clone, Copy)]
pub struct FrontOptions {
    pub dare: DareOptions,
    /// Worker threads for the per-weight solves; 1 = in-place serial sweep.
    pub workers: usize,
}

impl Default for FrontOptions {
    fn default() -> Self {
        FrontOptions {
            dare: DareOptions::default(),
            workers: 1,
        }
    }
}

/// Solve the scalarized problem at every point of the epsilon-net.
///
/// Results are assembled in net order regardless of worker count, so the
/// front is deterministic for a fixed problem and epsilon.
pub fn approximate_front(
    problem: &MultiObjectiveProblem,
    epsilon: f64,
    opts: &FrontOptions,
) -> Result<ParetoFrontApprox> {
    let net = epsilon_net(problem.num_objectives(), epsilon)?;
    approximate_front_on_net(problem, net, epsilon, opts)
}

fn approximate_front_on_net(
    problem: &MultiObjectiveProblem,
    net: WeightNet,
    epsilon: f64,
    opts: &FrontOptions,
) -> Result<ParetoFrontApprox> {
    let solve = |w: &WeightVector| solve_scalarized(problem, w, &opts.dare);
    let outcomes: Vec<Result<ParetoPoint>> = if opts.workers > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.workers)
            .build()
            .map_err(|e| Error::BadInput(format!("worker pool: {e}")))?;
        pool.install(|| net.points.par_iter().map(solve).collect())
    } else {
        net.points.iter().map(solve).collect()
    };
    let mut points = Vec::with_capacity(outcomes.len());
    let mut net_indices = Vec::with_capacity(outcomes.len());
    let mut failures = Vec::new();
    for (idx, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(point) => {
                points.push(point);
                net_indices.push(idx);
            }
            Err(err) => failures.push(FrontFailure {
                net_index: idx,
                weight: net.points[idx].clone(),
                message: err.to_string(),
            }),
        }
    }
    Ok(ParetoFrontApprox {
        epsilon,
        net,
        points,
        net_indices,
        failures,
        problem_digest: problem.digest(),
    })
}

/// True iff `l1` dominates `l2`: no entry worse than `tol` and at least one
/// entry better than `tol`.
pub fn dominates(l1: &[f64], l2: &[f64], tol: f64) -> bool {
    assert_eq!(l1.len(), l2.len(), "loss vectors must have equal length");
    let all_leq = l1.iter().zip(l2).all(|(a, b)| *a <= *b + tol);
    let some_lt = l1.iter().zip(l2).any(|(a, b)| *a < *b - tol);
    all_leq && some_lt
}

/// Indices of the nondominated loss vectors, in their original order.
pub fn dominance_filter(losses: &[Vec<f64>], tol: f64) -> Vec<usize> {
    (0..losses.len())
        .filter(|&i| {
            !losses
                .iter()
                .enumerate()
                .any(|(j, other)| j != i && dominates(other, &losses[i], tol))
        })
        .collect()
}

/// Evaluate every stabilizing candidate gain and keep the nondominated ones.
/// This is the ground-truth front at grid resolution, used to validate that
/// scalarization reaches every Pareto-optimal tradeoff.
pub fn brute_force_front(
    problem: &MultiObjectiveProblem,
    grid: &[DMatrix<f64>],
) -> Result<Vec<(DMatrix<f64>, Vec<f64>)>> {
    let mut evaluated: Vec<(DMatrix<f64>, Vec<f64>)> = Vec::new();
    for k in grid {
        if problem.dynamics.stabilizes(k, 0.0) {
            let losses = cost_vector(problem, k)?;
            evaluated.push((k.clone(), losses));
        }
    }
    if evaluated.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let loss_vectors: Vec<Vec<f64>> = evaluated.iter().map(|(_, l)| l.clone()).collect();
    let keep = dominance_filter(&loss_vectors, 0.0);
    Ok(keep.into_iter().map(|i| evaluated[i].clone()).collect())
}

/// Exact stable gain interval for a scalar plant: `rho(a + bk) < 1`.
pub fn scalar_stable_interval(dynamics: &DynamicsModel) -> Result<(f64, f64)> {
    if dynamics.state_dim() != 1 || dynamics.control_dim() != 1 {
        return Err(Error::BadInput(
            "stable interval is exact only for scalar plants".into(),
        ));
    }
    let a = dynamics.a()[(0, 0)];
    let b = dynamics.b()[(0, 0)];
    if b == 0.0 {
        return Err(Error::BadInput("B = 0 has no gain interval".into()));
    }
    let lo = (-1.0 - a) / b;
    let hi = (1.0 - a) / b;
    Ok((lo.min(hi), lo.max(hi)))
}

/// Uniform grid over the scalar stable interval, shrunk by `margin` on each
/// side.
pub fn scalar_gain_grid(
    dynamics: &DynamicsModel,
    step: f64,
    margin: f64,
) -> Result<Vec<DMatrix<f64>>> {
    if !step.is_finite() || step <= 0.0 {
        return Err(Error::BadInput("step must be positive".into()));
    }
    let (lo, hi) = scalar_stable_interval(dynamics)?;
    let (lo, hi) = (lo + margin, hi - margin);
    if lo >= hi {
        return Err(Error::EmptyGrid);
    }
    let count = ((hi - lo) / step).floor() as usize + 1;
    Ok((0..count)
        .map(|i| DMatrix::from_element(1, 1, lo + i as f64 * step))
        .collect())
}

/// Feasibility evidence for the convex lifting of one stabilizing gain.
#[derive(Debug, Clone)]
pub struct LiftingCertificate {
    /// Smallest eigenvalue of the lifted block matrix
    /// `[[G, AP+BL], [(AP+BL)', P]]`; nonnegative up to numerics when the
    /// gain is stabilizing.
    pub min_eig_schur: f64,
    /// `Tr(Q_i P) + Tr(L P^-1 L' R_i) - L_i(K)` per objective; zero up to
    /// numerics since the lifted point preserves objective values.
    pub objective_gap: Vec<f64>,
    pub feasible: bool,
}

/// Build the explicit lifted point `P = dlyape(A+BK, I)`, `L = KP`,
/// `G = P - I` for a stabilizing gain and check feasibility of the lifted
/// convex program along with objective-value preservation.
pub fn verify_lifting(
    dynamics: &DynamicsModel,
    k: &DMatrix<f64>,
    objectives: &[CostObjective],
) -> Result<LiftingCertificate> {
    let loop_matrix = dynamics.closed_loop(k);
    let rho = spectral_radius(&loop_matrix);
    if rho >= 1.0 {
        return Err(Error::Unstable { rho });
    }
    let n = dynamics.state_dim();
    let eye = DMatrix::<f64>::identity(n, n);
    let p = solve_dlyap(&loop_matrix, &eye)?;
    let l = k * &p;
    let g = &p - &eye;
    let off = dynamics.a() * &p + dynamics.b() * &l;

    let mut block = DMatrix::<f64>::zeros(2 * n, 2 * n);
    block.view_mut((0, 0), (n, n)).copy_from(&g);
    block.view_mut((0, n), (n, n)).copy_from(&off);
    block.view_mut((n, 0), (n, n)).copy_from(&off.transpose());
    block.view_mut((n, n), (n, n)).copy_from(&p);
    let block_sym = (&block + block.transpose()) * 0.5;
    let min_eig_schur = block_sym.symmetric_eigen().eigenvalues.min();

    // Tr(L P^-1 L' R_i) via a Cholesky solve of P X = L'.
    let chol = p.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
    let p_inv_lt = chol.solve(&l.transpose());
    let mut objective_gap = Vec::with_capacity(objectives.len());
    let mut feasible = min_eig_schur >= -1e-8;
    for obj in objectives {
        let lifted = (obj.q() * &p).trace() + (&l * &p_inv_lt * obj.r()).trace();
        let loss = crate::lqr::cost_via_value(dynamics, k, obj.q(), obj.r())?;
        let gap = lifted - loss;
        if gap.abs() > 1e-8 * (1.0 + loss.abs()) {
            feasible = false;
        }
        objective_gap.push(gap);
    }
    Ok(LiftingCertificate {
        min_eig_schur,
        objective_gap,
        feasible,
    })
}

/// Supremum gaps between two fronts over the same objectives.
#[derive(Debug, Clone, Copy)]
pub struct FrontDistance {
    /// sup over points of the weighted-loss gap to the nearest-weight point
    /// of the other front.
    pub weighted_sup: f64,
    /// sup of the entrywise (l-infinity) loss gap under the same matching.
    pub uniform_sup: f64,
}

/// Symmetric (Hausdorff-style) front distance.
///
/// Each point of one front is matched to the nearest-weight point of the
/// other (l1 distance, ties to the lowest index); the weighted gap
/// `|w'(L_a - L_b)|` uses the weight of the source point and the uniform gap
/// is the l-infinity loss difference. Suprema are taken over both matching
/// directions, so nested nets still measure how well the coarse front tracks
/// the fine one.
pub fn front_distance(a: &ParetoFrontApprox, b: &ParetoFrontApprox) -> Result<FrontDistance> {
    if a.net.m != b.net.m {
        return Err(Error::DimensionMismatch(format!(
            "fronts have m = {} and m = {}",
            a.net.m, b.net.m
        )));
    }
    if a.points.is_empty() || b.points.is_empty() {
        return Err(Error::BadInput("cannot compare empty fronts".into()));
    }
    let mut weighted_sup: f64 = 0.0;
    let mut uniform_sup: f64 = 0.0;
    let mut directed = |from: &ParetoFrontApprox, to: &ParetoFrontApprox| {
        for point in &from.points {
            let mut best = (0usize, f64::INFINITY);
            for (j, other) in to.points.iter().enumerate() {
                let d = point.weight.l1_distance(&other.weight);
                if d < best.1 {
                    best = (j, d);
                }
            }
            let matched = &to.points[best.0];
            let weighted_gap =
                (point.weight.dot(&point.losses) - point.weight.dot(&matched.losses)).abs();
            let uniform_gap = point
                .losses
                .iter()
                .zip(&matched.losses)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
            weighted_sup = weighted_sup.max(weighted_gap);
            uniform_sup = uniform_sup.max(uniform_gap);
        }
    };
    directed(a, b);
    directed(b, a);
    Ok(FrontDistance {
        weighted_sup,
        uniform_sup,
    })
}
