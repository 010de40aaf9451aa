//! Riccati perturbation diagnostics: closed-form bounds over the whole
//! weight simplex, empirical stability margins sampled from a solved front,
//! contraction constants, and perturbation experiments.
//!
//! Closed forms (computable from the input matrices alone):
//!
//! ```text
//!   P_max <= (sqrt(a_bar^2 + 4 m^2 max_j l_n(B R_j^-1 B') max_j l_1(Q_j)) + a_bar)
//!            / (2 l_n(B (sum_j R_j)^-1 B'))
//!   a_bar  = 1 + l_1(AA') + m^2 max_j l_1(Q_j) max_j l_n(B R_j^-1 B')
//!   K_max <= m max_j ||R_j^-1|| ||B|| ||A|| P_max
//!   Gamma  = max{1+P_max, 1+K_max, ||A||+1, ||B||+1,
//!              max_j ||Q_j||, max_j ||R_j||, 1 + m max_j ||R_j^-1||}
//! ```
//!
//! The perturbation bound and its validity threshold follow the shape
//!
//! ```text
//!   ||P - P_eps|| <= c tau^2/(1-rho^2) ||A||+^2 ||P||+^2 ||B||+^2 rbar^2 eps
//!   eps <= c (1-rho^2)^4/tau^4 ||A||+^-2 ||P||+^-3 ||B||+^-4 rbar^-3 ||L||+^-2
//! ```
//!
//! with an explicit `universal_c` knob defaulting to one: the theory pins the
//! shape, not the absolute constant, so every report is labeled "up to a
//! universal constant" rather than asserting one.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lqr::MultiObjectiveProblem;
use crate::pareto::ParetoFrontApprox;
use crate::random::{rng_from_seed, unit_spectral_direction};
use crate::scalarization::{combine_costs, solve_scalarized, WeightVector};
use crate::solvers::{growth_rate_tau, solve_dare, spectral_norm, spectral_radius, DareOptions};

/// Power scan depth used for every tau evaluation in this module.
const TAU_SCAN_DEPTH: usize = 500;

/// Spectral-radius cap and growth-rate cap sampled over a solved front.
///
/// Uniformity beyond the sampled net rests on continuity only, so the report
/// carries the sample count and whether every tau scan certified its tail.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct StabilityMargins {
    /// Cap on rho(A + B K_w): max sampled radius plus slack, clamped below 1.
    pub gamma_bar: f64,
    /// Max sampled tau(A + B K_w, gamma_bar).
    pub tau_bar: f64,
    /// Number of front points behind the estimate.
    pub sampled_weights: usize,
    /// True when every sampled tau scan certified its tail.
    pub certified: bool,
}

/// Closed-form constants plus the sampled extremes a perturbation report
/// refers to.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SensitivityConstants {
    /// Closed-form bound on max_w ||dare(A, B, Q_w, R_w)||.
    pub p_max: f64,
    /// Closed-form bound on max_w ||K_w||.
    pub k_max: f64,
    /// Gamma: the single scale constant dominating every term above.
    pub gamma_cap: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    /// 1 + m max_j ||R_j^-1||, the simplex-uniform bound on 1 + ||R_w^-1||.
    pub r_bar: f64,
    pub norm_a: f64,
    pub norm_b: f64,
    /// Max ||P_w|| over the sampled front (the quantity the perturbation
    /// bound shape uses).
    pub p_front: f64,
    /// Max ||A + B K_w|| over the sampled front.
    pub l_front: f64,
}

/// One perturbation sweep: empirical DARE sensitivity against the
/// theoretical shape.
#[derive(Debug, Clone, Serialize)]
pub struct PerturbationReport {
    pub epsilons: Vec<f64>,
    /// ||P - P_eps|| per epsilon; None when the perturbed problem left the
    /// solvable set and the entry was skipped.
    pub empirical_dp: Vec<Option<f64>>,
    /// The bound shape per epsilon with universal constant one, evaluated
    /// at the queried weight.
    pub theoretical_bound: Vec<f64>,
    /// Log-log regression slope of the empirical values (NaN with fewer than
    /// two usable entries).
    pub slope_loglog: f64,
}

fn min_sym_eig(m: &DMatrix<f64>) -> f64 {
    m.clone().symmetric_eigen().eigenvalues.min()
}

/// `B R^-1 B'`, symmetrized.
fn control_gram(b: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let chol = r.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
    let r_inv_bt = chol.solve(&b.transpose());
    let mut m = b * r_inv_bt;
    let mt = m.transpose();
    m += mt;
    m *= 0.5;
    Ok(m)
}

/// Closed-form upper bound on `max_w ||dare(A, B, Q_w, R_w)||`.
///
/// Fails with [`Error::DegenerateB`] when `B (sum_j R_j)^-1 B'` is singular
/// (B without full row rank); the bound is infinite there.
pub fn p_max_bound(problem: &MultiObjectiveProblem) -> Result<f64> {
    let a = problem.dynamics.a();
    let b = problem.dynamics.b();
    let m = problem.num_objectives() as f64;
    let lambda1_aat = spectral_norm(a).powi(2);
    let max_q = problem
        .objectives()
        .iter()
        .map(|o| spectral_norm(o.q()))
        .fold(0.0, f64::max);
    let max_gram_floor = problem
        .objectives()
        .iter()
        .map(|o| control_gram(b, o.r()).map(|g| min_sym_eig(&g)))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let r_sum = problem
        .objectives()
        .iter()
        .skip(1)
        .fold(problem.objective(0).r().clone(), |acc, o| acc + o.r());
    let sum_gram = control_gram(b, &r_sum)?;
    let denom_floor = min_sym_eig(&sum_gram);
    if denom_floor <= 1e-12 * spectral_norm(&sum_gram).max(1.0) {
        return Err(Error::DegenerateB);
    }
    let a_bar = 1.0 + lambda1_aat + m * m * max_q * max_gram_floor;
    let disc = a_bar * a_bar + 4.0 * m * m * max_gram_floor * max_q;
    Ok((disc.sqrt() + a_bar) / (2.0 * denom_floor))
}

/// Closed-form upper bound on `max_w ||K_w||`:
/// `m max_j ||R_j^-1|| ||B|| ||A|| P_max`.
pub fn k_max_bound(problem: &MultiObjectiveProblem) -> Result<f64> {
    let p_max = p_max_bound(problem)?;
    let m = problem.num_objectives() as f64;
    let max_r_inv = problem
        .objectives()
        .iter()
        .map(|o| 1.0 / min_sym_eig(o.r()))
        .fold(0.0, f64::max);
    Ok(m * max_r_inv
        * spectral_norm(problem.dynamics.b())
        * spectral_norm(problem.dynamics.a())
        * p_max)
}

/// Sample stability margins from a solved front.
///
/// `rho_slack` defaults to `0.05 (1 - max sampled rho)`. The cap is clamped
/// below one, and tau is re-evaluated at the capped rate for every sampled
/// closed loop.
pub fn estimate_margins(
    problem: &MultiObjectiveProblem,
    front: &ParetoFrontApprox,
    rho_slack: Option<f64>,
) -> Result<StabilityMargins> {
    if front.points.is_empty() {
        return Err(Error::BadInput("front has no points to sample".into()));
    }
    let mut radii = Vec::with_capacity(front.points.len());
    for (index, point) in front.points.iter().enumerate() {
        let rho = spectral_radius(&problem.dynamics.closed_loop(&point.gain));
        if rho >= 1.0 {
            return Err(Error::UnstablePoint { index });
        }
        radii.push(rho);
    }
    let max_rho = radii.iter().copied().fold(0.0, f64::max);
    let slack = rho_slack.unwrap_or(0.05 * (1.0 - max_rho));
    let gamma_bar = (max_rho + slack).min(1.0 - 1e-6);
    let mut tau_bar: f64 = 1.0;
    let mut certified = true;
    for point in &front.points {
        let loop_matrix = problem.dynamics.closed_loop(&point.gain);
        let growth = growth_rate_tau(&loop_matrix, gamma_bar, TAU_SCAN_DEPTH)?;
        tau_bar = tau_bar.max(growth.tau);
        certified &= growth.tail_certified;
    }
    Ok(StabilityMargins {
        gamma_bar,
        tau_bar,
        sampled_weights: front.points.len(),
        certified,
    })
}

/// Contraction constants of the perturbation fixed-point map at one
/// operating point (L, S, P):
///
/// ```text
///   C1 = tau^2/(1-rho^2) ||L||^2 ||S||          C3 = 3 C1
///   C2 = 8 tau^2/(1-rho^2) ||A||+^2 ||P||+^2 ||B||+^2 rbar^2
///   C4 = 44 tau^2/(1-rho^2) ||P||+^3 ||A||+^2 ||B||+^5 rbar^3
/// ```
#[allow(clippy::too_many_arguments)]
pub fn contraction_constants(
    l: &DMatrix<f64>,
    rho: f64,
    s: &DMatrix<f64>,
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    p: &DMatrix<f64>,
    r_bar: f64,
) -> Result<(f64, f64, f64, f64)> {
    if rho.is_nan() || rho >= 1.0 {
        return Err(Error::BadInput("rho must be below one".into()));
    }
    let growth = growth_rate_tau(l, rho, TAU_SCAN_DEPTH)?;
    let t2 = growth.tau * growth.tau / (1.0 - rho * rho);
    let norm_l = spectral_norm(l);
    let norm_s = spectral_norm(s);
    let ap = 1.0 + spectral_norm(a);
    let bp = 1.0 + spectral_norm(b);
    let pp = 1.0 + spectral_norm(p);
    let c1 = t2 * norm_l * norm_l * norm_s;
    let c2 = 8.0 * t2 * ap * ap * pp * pp * bp * bp * r_bar * r_bar;
    let c3 = 3.0 * c1;
    let c4 = 44.0 * t2 * pp.powi(3) * ap * ap * bp.powi(5) * r_bar.powi(3);
    Ok((c1, c2, c3, c4))
}

/// Assemble the constant set: closed-form Gamma plus contraction constants
/// evaluated at the uniform reference weight, plus sampled front extremes.
pub fn gamma_constant(
    problem: &MultiObjectiveProblem,
    margins: &StabilityMargins,
    front: &ParetoFrontApprox,
) -> Result<SensitivityConstants> {
    let p_max = p_max_bound(problem)?;
    let k_max = k_max_bound(problem)?;
    let a = problem.dynamics.a();
    let b = problem.dynamics.b();
    let m = problem.num_objectives();
    let norm_a = spectral_norm(a);
    let norm_b = spectral_norm(b);
    let max_q = problem
        .objectives()
        .iter()
        .map(|o| spectral_norm(o.q()))
        .fold(0.0, f64::max);
    let max_r = problem
        .objectives()
        .iter()
        .map(|o| spectral_norm(o.r()))
        .fold(0.0, f64::max);
    let max_r_inv = problem
        .objectives()
        .iter()
        .map(|o| 1.0 / min_sym_eig(o.r()))
        .fold(0.0, f64::max);
    let r_bar = 1.0 + m as f64 * max_r_inv;
    let gamma_cap = [
        1.0 + p_max,
        1.0 + k_max,
        1.0 + norm_a,
        1.0 + norm_b,
        max_q,
        max_r,
        r_bar,
    ]
    .into_iter()
    .fold(f64::MIN, f64::max);

    // Reference operating point for C1..C4: the uniform weight.
    let uniform = WeightVector::new(vec![1.0 / m as f64; m])?;
    let reference = solve_scalarized(problem, &uniform, &DareOptions::default())?;
    let (_, r_w) = combine_costs(problem, &uniform)?;
    let s_ref = control_gram(b, &r_w)?;
    let l_ref = problem.dynamics.closed_loop(&reference.gain);
    let (c1, c2, c3, c4) = contraction_constants(
        &l_ref,
        margins.gamma_bar,
        &s_ref,
        a,
        b,
        &reference.dare.p,
        r_bar,
    )?;

    let p_front = front
        .points
        .iter()
        .map(|pt| spectral_norm(&pt.dare.p))
        .fold(0.0, f64::max);
    let l_front = front
        .points
        .iter()
        .map(|pt| spectral_norm(&problem.dynamics.closed_loop(&pt.gain)))
        .fold(0.0, f64::max);

    Ok(SensitivityConstants {
        p_max,
        k_max,
        gamma_cap,
        c1,
        c2,
        c3,
        c4,
        r_bar,
        norm_a,
        norm_b,
        p_front,
        l_front,
    })
}

/// Theoretical DARE perturbation bound and its validity threshold, both up
/// to the universal constant `universal_c`.
///
/// Returns `(bound(epsilon), threshold)`: the bound is linear in epsilon and
/// the threshold is the largest perturbation size for which the contraction
/// argument applies.
pub fn dare_perturbation_bound(
    constants: &SensitivityConstants,
    margins: &StabilityMargins,
    epsilon: f64,
    universal_c: f64,
) -> (f64, f64) {
    let t2 = margins.tau_bar * margins.tau_bar / (1.0 - margins.gamma_bar * margins.gamma_bar);
    let ap = 1.0 + constants.norm_a;
    let bp = 1.0 + constants.norm_b;
    let pp = 1.0 + constants.p_front;
    let lp = 1.0 + constants.l_front;
    let bound = universal_c * t2 * ap * ap * pp * pp * bp * bp * constants.r_bar.powi(2) * epsilon;
    let threshold = universal_c * (1.0 - margins.gamma_bar.powi(2)).powi(4)
        / margins.tau_bar.powi(4)
        * ap.powi(-2)
        * pp.powi(-3)
        * bp.powi(-4)
        * constants.r_bar.powi(-3)
        * lp.powi(-2);
    (bound, threshold)
}

/// Gain perturbation bound `7 Gamma^4 dP`: a Riccati-solution shift of size
/// dP moves the optimal gain by at most this much.
pub fn gain_perturbation_bound(constants: &SensitivityConstants, dp: f64) -> f64 {
    7.0 * constants.gamma_cap.powi(4) * dp
}

/// Which matrices a perturbation experiment shakes.
#[derive(Debug, Clone, Copy)]
pub struct PerturbationSpec {
    pub perturb_q: bool,
    pub perturb_r: bool,
    pub perturb_a: bool,
    pub perturb_b: bool,
}

impl PerturbationSpec {
    /// Perturb the weighted cost matrices only (dynamics stay exact).
    pub fn cost_only() -> Self {
        PerturbationSpec {
            perturb_q: true,
            perturb_r: true,
            perturb_a: false,
            perturb_b: false,
        }
    }

    /// Perturb Q only.
    pub fn q_only() -> Self {
        PerturbationSpec {
            perturb_q: true,
            perturb_r: false,
            perturb_a: false,
            perturb_b: false,
        }
    }

    /// Perturb the dynamics only.
    pub fn dynamics_only() -> Self {
        PerturbationSpec {
            perturb_q: false,
            perturb_r: false,
            perturb_a: true,
            perturb_b: true,
        }
    }

    /// Perturb everything.
    pub fn all() -> Self {
        PerturbationSpec {
            perturb_q: true,
            perturb_r: true,
            perturb_a: true,
            perturb_b: true,
        }
    }
}

/// Ordinary least-squares slope of `ln y` against `ln x` over the points with
/// positive coordinates. NaN when fewer than two usable points remain.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(&x, &y)| x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite())
        .map(|(&x, &y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let mean_x = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let cov: f64 = pts.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let var: f64 = pts.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    cov / var
}

/// Measure `||P - P_eps||` at one weight for a list of perturbation sizes.
///
/// The perturbation directions are drawn once from the seed and rescaled to
/// spectral norm exactly epsilon for each entry, so the sweep isolates the
/// epsilon dependence. Cost directions are symmetric; dynamics directions are
/// general. Entries whose perturbed problem loses definiteness or
/// stabilizability are recorded as skipped, not fatal.
pub fn empirical_dare_sensitivity(
    problem: &MultiObjectiveProblem,
    w: &WeightVector,
    epsilons: &[f64],
    spec: PerturbationSpec,
    seed: u64,
    opts: &DareOptions,
) -> Result<PerturbationReport> {
    let a = problem.dynamics.a();
    let b = problem.dynamics.b();
    let n = problem.dynamics.state_dim();
    let d = problem.dynamics.control_dim();
    let (q_w, r_w) = combine_costs(problem, w)?;
    let base = solve_dare(a, b, &q_w, &r_w, opts)?;
    // Unit singular-value floor on P: the perturbation theory assumes it and
    // the objective floor guarantees it.
    debug_assert!(
        min_sym_eig(&base.p) >= 1.0 - 1e-9,
        "sigma_min(P) >= 1 violated; objectives must satisfy the unit floor"
    );
    let gain = crate::lqr::gain_from_value(&problem.dynamics, &base.p, &r_w)?;
    let loop_matrix = problem.dynamics.closed_loop(&gain);
    // Mid-gap rho: above rho(L_w), below 1, with finite tau.
    let rho_w = (1.0 + spectral_radius(&loop_matrix)) / 2.0;
    let tau_w = growth_rate_tau(&loop_matrix, rho_w, TAU_SCAN_DEPTH)?.tau;
    let t2 = tau_w * tau_w / (1.0 - rho_w * rho_w);
    let r_w_inv_norm = 1.0 / min_sym_eig(&r_w);

    let mut rng = rng_from_seed(seed);
    let dq = unit_spectral_direction(n, n, true, &mut rng);
    let dr = unit_spectral_direction(d, d, true, &mut rng);
    let da = unit_spectral_direction(n, n, false, &mut rng);
    let db = unit_spectral_direction(n, d, false, &mut rng);

    let mut empirical_dp = Vec::with_capacity(epsilons.len());
    let mut theoretical_bound = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        if eps < 0.0 {
            return Err(Error::BadInput("perturbation sizes must be >= 0".into()));
        }
        let q_eps = if spec.perturb_q {
            &q_w + &dq * eps
        } else {
            q_w.clone()
        };
        let r_eps = if spec.perturb_r {
            &r_w + &dr * eps
        } else {
            r_w.clone()
        };
        let a_eps = if spec.perturb_a {
            a + &da * eps
        } else {
            a.clone()
        };
        let b_eps = if spec.perturb_b {
            b + &db * eps
        } else {
            b.clone()
        };

        let r_eps_inv_norm = match min_sym_eig(&r_eps) {
            floor if floor > 0.0 => 1.0 / floor,
            _ => f64::INFINITY,
        };
        let r_bar_eps = 1.0 + r_w_inv_norm.max(r_eps_inv_norm);
        theoretical_bound.push(
            t2 * (1.0 + spectral_norm(a)).powi(2)
                * (1.0 + spectral_norm(&base.p)).powi(2)
                * (1.0 + spectral_norm(b)).powi(2)
                * r_bar_eps.powi(2)
                * eps,
        );

        if min_sym_eig(&q_eps) <= 0.0 || min_sym_eig(&r_eps) <= 0.0 {
            empirical_dp.push(None);
            continue;
        }
        match solve_dare(&a_eps, &b_eps, &q_eps, &r_eps, opts) {
            Ok(perturbed) => empirical_dp.push(Some(spectral_norm(&(&base.p - &perturbed.p)))),
            Err(_) => empirical_dp.push(None),
        }
    }

    let usable: Vec<(f64, f64)> = epsilons
        .iter()
        .zip(&empirical_dp)
        .filter_map(|(&e, dp)| dp.map(|v| (e, v)))
        .collect();
    let xs: Vec<f64> = usable.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = usable.iter().map(|p| p.1).collect();
    let slope_loglog = loglog_slope(&xs, &ys);

    Ok(PerturbationReport {
        epsilons: epsilons.to_vec(),
        empirical_dp,
        theoretical_bound,
        slope_loglog,
    })
}

/// Everything the sensitivity pipeline produces for one problem.
#[derive(Debug, Clone, Serialize)]
pub struct SensitivityReport {
    pub margins: StabilityMargins,
    pub constants: SensitivityConstants,
    pub perturbation: PerturbationReport,
    pub universal_c: f64,
    /// Largest perturbation size the contraction argument covers (up to the
    /// universal constant).
    pub validity_threshold: f64,
    /// Per epsilon: whether it sits inside the validity threshold.
    pub inside_validity: Vec<bool>,
}

/// Run the full sensitivity pipeline: front sweep, margins, constants, and
/// an epsilon sweep at the uniform reference weight.
pub fn sensitivity_report(
    problem: &MultiObjectiveProblem,
    front: &ParetoFrontApprox,
    epsilons: &[f64],
    seed: u64,
    universal_c: f64,
) -> Result<SensitivityReport> {
    let margins = estimate_margins(problem, front, None)?;
    let constants = gamma_constant(problem, &margins, front)?;
    let m = problem.num_objectives();
    let uniform = WeightVector::new(vec![1.0 / m as f64; m])?;
    let mut perturbation = empirical_dare_sensitivity(
        problem,
        &uniform,
        epsilons,
        PerturbationSpec::cost_only(),
        seed,
        &DareOptions::default(),
    )?;
    for bound in &mut perturbation.theoretical_bound {
        *bound *= universal_c;
    }
    let (_, validity_threshold) = dare_perturbation_bound(&constants, &margins, 1.0, universal_c);
    let inside_validity = epsilons.iter().map(|&e| e <= validity_threshold).collect();
    Ok(SensitivityReport {
        margins,
        constants,
        perturbation,
        universal_c,
        validity_threshold,
        inside_validity,
    })
}
