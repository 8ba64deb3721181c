//! Checks solved controls against first-order optimality of the control
//! problem itself, with constraint gradients taken by finite differences of
//! the forward simulation rather than from the shooting equations.

use attitude_core::dynamics::{propagate, DynamicsState};
use attitude_core::optimality::{optimal_control, Bounds};
use attitude_core::shooting::{modified_shooting_solve, ShootingVector, SolverOptions};
use attitude_core::so3::log_map;
use attitude_core::{InertiaModel, ManeuverProblem, Rotation, Vec3};
use nalgebra::{DMatrix, DVector, Vector6};

fn maneuver(c: f64) -> ManeuverProblem {
    ManeuverProblem {
        inertia: InertiaModel::new(800.0, 1200.0, 1000.0).unwrap(),
        r_initial: Rotation::identity(),
        r_final: Rotation::from_axis_angle(&Vec3::new(1.0, -2.0, 0.5), 25f64.to_radians()),
        pi_initial: Vec3::new(6.0, -3.0, 2.0),
        pi_final: Vec3::new(0.0, 1.0, 0.0),
        bounds: Bounds::new(Vec3::repeat(c), Vec3::repeat(500.0)).unwrap(),
        steps: 20,
        h: 0.25,
    }
}

fn terminal(p: &ManeuverProblem, u: &[f64]) -> Vector6<f64> {
    let controls: Vec<Vec3> = u.chunks(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect();
    let init = DynamicsState {
        r: p.r_initial,
        pi: p.pi_initial,
    };
    let last = *propagate(&init, &controls, p.h, &p.inertia).unwrap().last().unwrap();
    let ornt = log_map(&p.r_final.transpose().compose(&last.r)).unwrap();
    let mom = last.pi - p.pi_final;
    Vector6::new(mom.x, mom.y, mom.z, ornt.x, ornt.y, ornt.z)
}

struct Kkt {
    feasibility: f64,
    stationarity: f64,
    wrong_sign: usize,
    saturated: usize,
}

fn check(p: &ManeuverProblem) -> Kkt {
    let sol = modified_shooting_solve(&ShootingVector::initial_guess(p), p, &SolverOptions::default()).unwrap();
    let u: Vec<f64> = (0..p.steps)
        .flat_map(|k| {
            optimal_control(&sol.x.lambda_bar(k), &p.bounds)
                .iter()
                .copied()
                .collect::<Vec<_>>()
        })
        .collect();
    let n = u.len();
    // noise from the 1e-12 implicit-solve tolerance dominates below this step
    let delta = 1e-4;
    let mut g = DMatrix::zeros(6, n);
    for j in 0..n {
        let mut hi = u.clone();
        let mut lo = u.clone();
        hi[j] += delta;
        lo[j] -= delta;
        g.set_column(j, &((terminal(p, &hi) - terminal(p, &lo)) / (2.0 * delta)));
    }
    let grad = DVector::from_iterator(n, u.iter().map(|v| p.h * v));
    let free: Vec<usize> = (0..n).filter(|&j| u[j].abs() < p.bounds.c[j % 3]).collect();
    // multipliers from the unsaturated components only
    let g_free = DMatrix::from_fn(free.len(), 6, |r, c| g[(c, free[r])]);
    let grad_free = DVector::from_iterator(free.len(), free.iter().map(|&j| grad[j]));
    let nu = g_free.clone().svd(true, true).solve(&grad_free, 1e-14).unwrap();
    let lagrangian = &grad - g.transpose() * &nu;
    let stationarity = free.iter().map(|&j| lagrangian[j].abs()).fold(0.0, f64::max) / grad.amax();
    let saturated: Vec<usize> = (0..n).filter(|&j| u[j].abs() >= p.bounds.c[j % 3]).collect();
    // pushing a saturated component further out must not pay off
    let wrong_sign = saturated
        .iter()
        .filter(|&&j| lagrangian[j] * u[j].signum() > 1e-6 * grad.amax())
        .count();
    Kkt {
        feasibility: terminal(p, &u).amax(),
        stationarity,
        wrong_sign,
        saturated: saturated.len(),
    }
}

#[test]
fn unconstrained_solution_is_stationary() {
    let k = check(&maneuver(1e3));
    assert_eq!(k.saturated, 0);
    assert!(k.feasibility < 1e-9, "{}", k.feasibility);
    assert!(k.stationarity < 1e-6, "{}", k.stationarity);
}

#[test]
fn saturated_solution_satisfies_bound_multiplier_signs() {
    let peak = {
        let p = maneuver(1e3);
        let sol = modified_shooting_solve(&ShootingVector::initial_guess(&p), &p, &SolverOptions::default()).unwrap();
        (0..p.steps).map(|k| sol.x.lambda_bar(k).amax()).fold(0.0, f64::max)
    };
    let k = check(&maneuver(0.7 * peak));
    assert!(k.saturated > 0);
    assert!(k.feasibility < 1e-9, "{}", k.feasibility);
    assert!(k.stationarity < 1e-6, "{}", k.stationarity);
    assert_eq!(k.wrong_sign, 0);
}
