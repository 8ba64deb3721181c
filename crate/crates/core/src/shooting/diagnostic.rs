//! Jacobian of the momentum-only system, without the orientation constraint
//! and without `μ̄_0`, for which nonsingularity holds whenever at least one
//! control component is unsaturated.

use super::assembly::{jacobian_from_geometry, StepGeometry};
use super::{ShootingError, ShootingVector};
use crate::linalg::condition_number;
use crate::problem::ManeuverProblem;
use nalgebra::{DMatrix, DVector};

/// Jacobian with respect to `Y = (Π_0, λ̄_0, …, Π_N, λ̄_N)`, size `6N + 6`.
pub fn momentum_only_jacobian(y: &DVector<f64>, problem: &ManeuverProblem) -> Result<DMatrix<f64>, ShootingError> {
    let steps = problem.steps;
    let n = 6 * steps + 6;
    if y.len() != n {
        return Err(ShootingError::DimensionMismatch {
            expected: n,
            got: y.len(),
        });
    }
    let mut data = DVector::zeros(n + 3);
    data.rows_mut(0, n).copy_from(y);
    let x = ShootingVector::from_vector(steps, data)?;
    // With μ̄_0 = 0 every Q-dependent term drops out; the orientation row is
    // discarded, so its value is irrelevant and a failing log is tolerated.
    let mut relaxed = problem.clone();
    relaxed.r_final = problem.r_initial;
    let geo = StepGeometry::build(&x, &relaxed, true)?;
    let full = jacobian_from_geometry(&x, &relaxed, &geo);
    Ok(full.view((0, 0), (n, n)).into_owned())
}

/// Momentum-only Jacobian and its 2-norm condition number.
pub fn momentum_only_jacobian_diagnostic(
    y: &DVector<f64>,
    problem: &ManeuverProblem,
) -> Result<(DMatrix<f64>, f64), ShootingError> {
    let jac = momentum_only_jacobian(y, problem)?;
    let cond = condition_number(&jac);
    Ok((jac, cond))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{sensitivity_matrices, solve_relative_rotation, InertiaModel};
    use crate::optimality::{control_generalized_gradient, Bounds};
    use crate::so3::{hat, Mat3, Rotation, Vec3};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn problem(steps: usize) -> ManeuverProblem {
        ManeuverProblem {
            inertia: InertiaModel::new(800.0, 1200.0, 1000.0).unwrap(),
            r_initial: Rotation::identity(),
            r_final: Rotation::identity(),
            pi_initial: Vec3::new(30.0, -10.0, 10.0),
            pi_final: Vec3::zeros(),
            bounds: Bounds::new(Vec3::repeat(20.0), Vec3::repeat(70.0)).unwrap(),
            steps,
            h: 0.1,
        }
    }

    #[test]
    fn diagonal_blocks_match_independent_assembly() {
        let p = problem(8);
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let y = DVector::from_fn(6 * 8 + 6, |_, _| rng.random_range(-30.0..30.0));
        let jac = momentum_only_jacobian(&y, &p).unwrap();
        for k in 0..8 {
            let pi = Vec3::new(y[6 * k], y[6 * k + 1], y[6 * k + 2]);
            let lam = Vec3::new(y[6 * k + 3], y[6 * k + 4], y[6 * k + 5]);
            let f = solve_relative_rotation(&pi, p.h, &p.inertia).unwrap().f;
            let (_, n) = sensitivity_matrices(&f, &p.inertia, p.h).unwrap();
            let m = f.matrix() - n * hat(&(f.matrix().transpose() * pi)) * p.h;
            let d = control_generalized_gradient(&lam, &p.bounds);
            let minus_j = -jac.view((6 * k, 6 * k), (6, 6)).into_owned();
            let top_left = minus_j.view((0, 0), (3, 3)).into_owned();
            assert!((top_left - m.transpose()).amax() < 1e-10);
            assert_eq!(minus_j.view((0, 3), (3, 3)).into_owned(), d * p.h);
            assert_eq!(minus_j.view((3, 0), (3, 3)).into_owned(), Mat3::zeros());
            assert_eq!(minus_j.view((3, 3), (3, 3)).into_owned(), Mat3::identity());
        }
    }

    #[test]
    fn interior_controls_give_finite_condition() {
        let p = problem(10);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let y = DVector::from_fn(66, |i, _| {
            if i % 6 < 3 {
                rng.random_range(-60.0..60.0)
            } else {
                rng.random_range(-19.0..19.0)
            }
        });
        let (_, cond) = momentum_only_jacobian_diagnostic(&y, &p).unwrap();
        assert!(cond.is_finite() && cond < 1e12);
    }
}
