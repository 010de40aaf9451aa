//! Named benchmark problems used by the CLI, tests, and docs.

use nalgebra::DMatrix;

use crate::lqr::{CostObjective, DynamicsModel, MultiObjectiveProblem};

fn scalar(v: f64) -> DMatrix<f64> {
    DMatrix::from_element(1, 1, v)
}

/// SYS-0: memoryless scalar plant, single unit objective. The Riccati
/// solution is exactly Q.
pub fn sys0() -> MultiObjectiveProblem {
    let dynamics = DynamicsModel::new(scalar(0.0), scalar(1.0)).unwrap();
    MultiObjectiveProblem::new(
        dynamics,
        vec![CostObjective::new("unit", scalar(1.0), scalar(1.0)).unwrap()],
    )
    .unwrap()
}

/// Golden system: A = B = Q = R = 1. The Riccati solution is the golden
/// ratio and the optimal gain is -(sqrt(5)-1)/2.
pub fn golden() -> MultiObjectiveProblem {
    let dynamics = DynamicsModel::new(scalar(1.0), scalar(1.0)).unwrap();
    MultiObjectiveProblem::new(
        dynamics,
        vec![CostObjective::new("unit", scalar(1.0), scalar(1.0)).unwrap()],
    )
    .unwrap()
}

/// SYS-2: scalar plant A = 0.9, B = 1 with two objectives sharing the unit
/// state cost but penalizing control at 1 and at 10. The benchmark for
/// two-objective tradeoff sweeps.
pub fn sys2() -> MultiObjectiveProblem {
    let dynamics = DynamicsModel::new(scalar(0.9), scalar(1.0)).unwrap();
    MultiObjectiveProblem::new(
        dynamics,
        vec![
            CostObjective::new("cheap control", scalar(1.0), scalar(1.0)).unwrap(),
            CostObjective::new("dear control", scalar(1.0), scalar(10.0)).unwrap(),
        ],
    )
    .unwrap()
}

/// Inverted pendulum, linearized at the upright position and discretized by
/// forward Euler:
///
/// ```text
///   x = [angle, angular rate]
///   x+ = [[1, dt], [g/l dt, 1]] x + [0, dt/(m l^2)]' u
///   g = 9.81, l = 1, m = 1, dt = 0.05
/// ```
///
/// Objective one penalizes distance to upright (Q = diag(100, 1), R = 1);
/// objective two penalizes control effort (Q = I, R = 100). Both already
/// satisfy the unit singular-value floor.
pub fn inverted_pendulum() -> MultiObjectiveProblem {
    let dt = 0.05;
    let gravity = 9.81;
    let a = DMatrix::from_row_slice(2, 2, &[1.0, dt, gravity * dt, 1.0]);
    let b = DMatrix::from_row_slice(2, 1, &[0.0, dt]);
    let dynamics = DynamicsModel::new(a, b).unwrap();
    let q1 = DMatrix::from_row_slice(2, 2, &[100.0, 0.0, 0.0, 1.0]);
    let q2 = DMatrix::identity(2, 2);
    MultiObjectiveProblem::new(
        dynamics,
        vec![
            CostObjective::new("upright distance", q1, scalar(1.0)).unwrap(),
            CostObjective::new("control effort", q2, scalar(100.0)).unwrap(),
        ],
    )
    .unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::spectral_radius;

    #[test]
    fn benchmark_problems_construct() {
        assert_eq!(sys0().num_objectives(), 1);
        assert_eq!(golden().num_objectives(), 1);
        assert_eq!(sys2().num_objectives(), 2);
        let pendulum = inverted_pendulum();
        assert_eq!(pendulum.dynamics.state_dim(), 2);
        // Open loop is unstable (that is the point of the demo).
        assert!(spectral_radius(pendulum.dynamics.a()) > 1.0);
    }
}
