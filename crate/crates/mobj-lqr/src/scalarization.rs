//! Weight-simplex machinery: epsilon-nets, weighted cost combination, and
//! scalarized optimal solves.
//!
//! The net is a uniform composition grid: resolution `k = ceil(2(m-1)/eps)`
//! and points `(j_1/k, ..., j_m/k)` over all nonnegative integer compositions
//! `sum j_i = k`, enumerated in ascending lexicographic order. Rounding any
//! weight to the grid by the largest-remainder method moves each coordinate
//! by at most `1/k` and at most `m - 1` coordinates in each direction, so the
//! l1 covering radius is at most `2(m-1)/k <= eps`. Cardinality is
//! `binom(k+m-1, m-1)`, matching the `O(eps^-m)` scaling.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::lqr::{cost_vector, gain_from_value, MultiObjectiveProblem};
use crate::pareto::ParetoPoint;
use crate::solvers::{solve_dare, DareOptions};

/// Default cap on the number of net points.
pub const DEFAULT_NET_BUDGET: u128 = 10_000_000;

/// A point of the probability simplex: nonnegative entries summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::BadInput("weight vector must be non-empty".into()));
        }
        if w.iter().any(|&x| !x.is_finite() || x < 0.0) {
            return Err(Error::BadInput(
                "weights must be finite and nonnegative".into(),
            ));
        }
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::BadInput(format!(
                "weights must sum to one (got {sum})"
            )));
        }
        Ok(WeightVector(w))
    }

    /// Dimension m.
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// l1 distance to another weight of the same dimension.
    pub fn l1_distance(&self, other: &WeightVector) -> f64 {
        debug_assert_eq!(self.len(), other.len());
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .sum()
    }

    /// Inner product with a loss vector.
    pub fn dot(&self, losses: &[f64]) -> f64 {
        debug_assert_eq!(self.len(), losses.len());
        self.0.iter().zip(losses).map(|(w, l)| w * l).sum()
    }
}

/// An epsilon-net of the simplex as a composition grid.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightNet {
    pub epsilon: f64,
    pub m: usize,
    /// Grid resolution k: every coordinate is a multiple of 1/k.
    pub resolution: usize,
    pub points: Vec<WeightVector>,
}

fn binomial(n: u128, k: u128) -> Option<u128> {
    let k = k.min(n - k);
    let mut out: u128 = 1;
    for i in 0..k {
        out = out.checked_mul(n - i)?;
        out /= i + 1;
    }
    Some(out)
}

/// Number of compositions of `total` into `parts` nonnegative integers.
fn composition_count(total: u128, parts: u128) -> Option<u128> {
    binomial(total + parts - 1, parts - 1)
}

/// Build the epsilon-net with the default point budget.
pub fn epsilon_net(m: usize, epsilon: f64) -> Result<WeightNet> {
    epsilon_net_with_budget(m, epsilon, DEFAULT_NET_BUDGET)
}

/// Build the epsilon-net, failing with [`Error::TooFine`] when the grid would
/// exceed `budget` points.
pub fn epsilon_net_with_budget(m: usize, epsilon: f64, budget: u128) -> Result<WeightNet> {
    if m == 0 {
        return Err(Error::BadInput("m must be at least one".into()));
    }
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::BadInput("epsilon must be in (0, 1]".into()));
    }
    let resolution = ((2.0 * (m as f64 - 1.0) / epsilon).ceil() as usize).max(1);
    let expected = composition_count(resolution as u128, m as u128)
        .filter(|&c| c <= budget)
        .ok_or(Error::TooFine {
            points: composition_count(resolution as u128, m as u128).unwrap_or(u128::MAX),
            budget,
        })?;
    let mut points = Vec::with_capacity(expected as usize);
    let mut composition = vec![0_usize; m];
    enumerate_compositions(resolution, 0, &mut composition, &mut |c| {
        let w: Vec<f64> = c.iter().map(|&j| j as f64 / resolution as f64).collect();
        points.push(WeightVector(w));
    });
    debug_assert_eq!(points.len() as u128, expected);
    Ok(WeightNet {
        epsilon,
        m,
        resolution,
        points,
    })
}

fn enumerate_compositions(
    remaining: usize,
    index: usize,
    composition: &mut Vec<usize>,
    emit: &mut impl FnMut(&[usize]),
) {
    if index == composition.len() - 1 {
        composition[index] = remaining;
        emit(composition);
        return;
    }
    for j in 0..=remaining {
        composition[index] = j;
        enumerate_compositions(remaining - j, index + 1, composition, emit);
    }
}

/// Weighted cost matrices `Q_w = sum_i w_i Q_i`, `R_w = sum_i w_i R_i`.
///
/// Convex combinations of positive definite matrices stay positive definite,
/// and the singular-value floor of the inputs carries over.
pub fn combine_costs(
    problem: &MultiObjectiveProblem,
    w: &WeightVector,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if w.len() != problem.num_objectives() {
        return Err(Error::DimensionMismatch(format!(
            "weight has {} entries for {} objectives",
            w.len(),
            problem.num_objectives()
        )));
    }
    let n = problem.dynamics.state_dim();
    let d = problem.dynamics.control_dim();
    let mut q = DMatrix::zeros(n, n);
    let mut r = DMatrix::zeros(d, d);
    for (wi, obj) in w.as_slice().iter().zip(problem.objectives()) {
        q += obj.q() * *wi;
        r += obj.r() * *wi;
    }
    Ok((q, r))
}

/// Index and l1 distance of the nearest net point (exhaustive scan, ties to
/// the lowest index).
pub fn nearest_net_point(net: &WeightNet, w: &WeightVector) -> Result<(usize, f64)> {
    if w.len() != net.m {
        return Err(Error::DimensionMismatch(format!(
            "weight has {} entries, net has m = {}",
            w.len(),
            net.m
        )));
    }
    let mut best = (0usize, f64::INFINITY);
    for (i, p) in net.points.iter().enumerate() {
        let d = w.l1_distance(p);
        if d < best.1 {
            best = (i, d);
        }
    }
    Ok(best)
}

/// O(m log m) nearest-grid-point shortcut via largest-remainder rounding.
///
/// Returns the index of the rounded grid point and its l1 distance from `w`.
/// The rounded point is within the covering radius but is not always the
/// exact l1-nearest; tests cross-check the distance against the scan.
pub fn nearest_net_point_rounded(net: &WeightNet, w: &WeightVector) -> Result<(usize, f64)> {
    if w.len() != net.m {
        return Err(Error::DimensionMismatch(format!(
            "weight has {} entries, net has m = {}",
            w.len(),
            net.m
        )));
    }
    let k = net.resolution;
    let scaled: Vec<f64> = w.as_slice().iter().map(|x| x * k as f64).collect();
    let mut floors: Vec<usize> = scaled.iter().map(|f| f.floor() as usize).collect();
    let assigned: usize = floors.iter().sum();
    let mut deficit = k.saturating_sub(assigned);
    // Largest remainders get the leftover units; ties to the lowest index.
    let mut order: Vec<usize> = (0..net.m).collect();
    order.sort_by(|&i, &j| {
        let ri = scaled[i] - floors[i] as f64;
        let rj = scaled[j] - floors[j] as f64;
        rj.partial_cmp(&ri).unwrap().then(i.cmp(&j))
    });
    for &i in &order {
        if deficit == 0 {
            break;
        }
        floors[i] += 1;
        deficit -= 1;
    }
    let index = composition_rank(&floors, k);
    let distance = w.l1_distance(&net.points[index]);
    Ok((index, distance))
}

/// Rank of a composition in the ascending lexicographic enumeration.
fn composition_rank(composition: &[usize], total: usize) -> usize {
    let m = composition.len();
    let mut rank: u128 = 0;
    let mut remaining = total;
    for (idx, &j) in composition.iter().enumerate() {
        if idx == m - 1 {
            break;
        }
        let parts_left = (m - idx - 1) as u128;
        for v in 0..j {
            rank +=
                composition_count((remaining - v) as u128, parts_left).expect("rank fits in u128");
        }
        remaining -= j;
    }
    rank as usize
}

/// Solve the scalarized problem at `w`: the optimal gain for
/// `(Q_w, R_w)` together with its per-objective losses.
pub fn solve_scalarized(
    problem: &MultiObjectiveProblem,
    w: &WeightVector,
    opts: &DareOptions,
) -> Result<ParetoPoint> {
    let (q_w, r_w) = combine_costs(problem, w)?;
    let sol = solve_dare(problem.dynamics.a(), problem.dynamics.b(), &q_w, &r_w, opts)?;
    let gain = gain_from_value(&problem.dynamics, &sol.p, &r_w)?;
    let losses = cost_vector(problem, &gain)?;
    Ok(ParetoPoint {
        weight: w.clone(),
        gain,
        dare: sol,
        losses,
    })
}
