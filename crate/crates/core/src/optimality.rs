//! First-order optimality conditions in scaled, reduced form.
//!
//! Only the scaled momentum costates `λ̄_k = h λ_k` and the reduced rotation
//! costate `μ̄_0` are carried; the rotation costates at later steps follow
//! from `μ̄_k = Q_kᵀ μ̄_0` with `Q_k = F_1 ⋯ F_k`.

use crate::dynamics::{costate_transition, sensitivity_matrices, solve_relative_rotation, DynamicsError, InertiaModel};
use crate::so3::{log_map, right_jacobian_inv, skew_vee, Mat3, Rotation, So3Error, Vec3};
use nalgebra::Vector6;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OptimalityError {
    #[error("bounds must be positive and finite: {0}")]
    InvalidBounds(String),
    #[error("momentum component {component} is zero at an active bound")]
    DivisionByZeroMomentum { component: usize },
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    So3(#[from] So3Error),
}

/// Per-axis torque bound `c` (N·m) and momentum bound `b` (N·m·s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub c: Vec3,
    pub b: Vec3,
}

impl Bounds {
    pub fn new(c: Vec3, b: Vec3) -> Result<Self, OptimalityError> {
        for (name, v) in [("c", &c), ("b", &b)] {
            if v.iter().any(|x| !x.is_finite() || *x <= 0.0) {
                return Err(OptimalityError::InvalidBounds(format!("{name} = {:?}", v.as_slice())));
            }
        }
        Ok(Self { c, b })
    }

    /// Bounds large enough never to bind in practice.
    pub fn unbounded() -> Self {
        Self {
            c: Vec3::repeat(1e12),
            b: Vec3::repeat(1e12),
        }
    }
}

fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Clamp law `u^i = −min{c^i, |λ̄^i|} sgn(λ̄^i)` with `sgn(0) = 0`.
pub fn optimal_control(lambda_bar: &Vec3, bounds: &Bounds) -> Vec3 {
    Vec3::from_fn(|i, _| -bounds.c[i].min(lambda_bar[i].abs()) * sgn(lambda_bar[i]))
}

/// Generalized gradient of the clamp law: `−1` where `|λ̄^i| ≤ c^i`, else `0`.
pub fn control_generalized_gradient(lambda_bar: &Vec3, bounds: &Bounds) -> Mat3 {
    Mat3::from_diagonal(&Vec3::from_fn(|i, _| {
        if lambda_bar[i].abs() <= bounds.c[i] {
            -1.0
        } else {
            0.0
        }
    }))
}

/// `Π_{k+1} − F_kᵀ Π_k − h u*(λ̄_k)` given the relative rotation `F_k`.
pub fn sigma_residual_with(
    f_k: &Rotation,
    pi_k: &Vec3,
    pi_k1: &Vec3,
    lambda_bar_k: &Vec3,
    h: f64,
    bounds: &Bounds,
) -> Vec3 {
    pi_k1 - f_k.matrix().transpose() * pi_k - optimal_control(lambda_bar_k, bounds) * h
}

/// Momentum matching residual; solves for `F_k` from `Π_k`.
pub fn sigma_residual(
    pi_k: &Vec3,
    pi_k1: &Vec3,
    lambda_bar_k: &Vec3,
    h: f64,
    inertia: &InertiaModel,
    bounds: &Bounds,
) -> Result<Vec3, OptimalityError> {
    let sol = solve_relative_rotation(pi_k, h, inertia)?;
    Ok(sigma_residual_with(&sol.f, pi_k, pi_k1, lambda_bar_k, h, bounds))
}

/// Scaled costate residual at step `k+1` from precomputed `F_{k+1}` and `N_{k+1}`:
/// `h β⊙Π + (F − h N hat(FᵀΠ)) λ̄_{k+1} − λ̄_k + N Qᵀ μ̄_0`.
#[allow(clippy::too_many_arguments)]
pub fn xi_residual_with(
    f_k1: &Rotation,
    n_k1: &Mat3,
    pi_k1: &Vec3,
    lambda_bar_k: &Vec3,
    lambda_bar_k1: &Vec3,
    mu_bar0: &Vec3,
    q_k1: &Rotation,
    beta_k1: &Vec3,
    h: f64,
) -> Vec3 {
    beta_k1.component_mul(pi_k1) * h + costate_transition(f_k1, n_k1, pi_k1, h) * lambda_bar_k1 - lambda_bar_k
        + n_k1 * (q_k1.matrix().transpose() * mu_bar0)
}

/// Scaled costate residual; solves for `F_{k+1}` from `Π_{k+1}`.
#[allow(clippy::too_many_arguments)]
pub fn xi_residual(
    pi_k1: &Vec3,
    lambda_bar_k: &Vec3,
    lambda_bar_k1: &Vec3,
    mu_bar0: &Vec3,
    q_k1: &Rotation,
    beta_k1: &Vec3,
    h: f64,
    inertia: &InertiaModel,
) -> Result<Vec3, OptimalityError> {
    let sol = solve_relative_rotation(pi_k1, h, inertia)?;
    let (_, n) = sensitivity_matrices(&sol.f, inertia, h)?;
    Ok(xi_residual_with(
        &sol.f,
        &n,
        pi_k1,
        lambda_bar_k,
        lambda_bar_k1,
        mu_bar0,
        q_k1,
        beta_k1,
        h,
    ))
}

/// `R_fᵀ R_i F_0 ⋯ F_{N−1}`.
pub fn terminal_mismatch(r_i: &Rotation, r_f: &Rotation, f_seq: &[Rotation]) -> Rotation {
    f_seq.iter().fold(r_f.transpose().compose(r_i), |acc, f| acc.compose(f))
}

/// `vee(log(R_fᵀ R_i F_0 ⋯ F_{N−1}))`.
pub fn orientation_constraint(r_i: &Rotation, r_f: &Rotation, f_seq: &[Rotation]) -> Result<Vec3, OptimalityError> {
    Ok(log_map(&terminal_mismatch(r_i, r_f, f_seq))?)
}

/// `(F_{N−1}ᵀ ⋯ F_{k+1}ᵀ) vee(F_kᵀ ∂F_k/∂Π_k^i)` for each column `i`.
///
/// This is the gradient of the orientation constraint where the constraint
/// vanishes; away from closure use [`orientation_constraint_jacobian`].
pub fn orientation_constraint_gradient(k: usize, f_seq: &[Rotation], df_k: &[Mat3; 3]) -> Mat3 {
    let trailing = f_seq[k + 1..].iter().fold(Mat3::identity(), |acc, f| acc * f.matrix());
    let fk_t = f_seq[k].matrix().transpose();
    let tangent = Mat3::from_columns(&[
        skew_vee(&(fk_t * df_k[0])),
        skew_vee(&(fk_t * df_k[1])),
        skew_vee(&(fk_t * df_k[2])),
    ]);
    trailing.transpose() * tangent
}

/// Exact Jacobian of [`orientation_constraint`] with respect to `Π_k`,
/// including the inverse right Jacobian of the logarithm.
pub fn orientation_constraint_jacobian(
    r_i: &Rotation,
    r_f: &Rotation,
    f_seq: &[Rotation],
    k: usize,
    df_k: &[Mat3; 3],
) -> Result<Mat3, OptimalityError> {
    let c = orientation_constraint(r_i, r_f, f_seq)?;
    Ok(right_jacobian_inv(&c) * orientation_constraint_gradient(k, f_seq, df_k))
}

/// `(Π_N − Π_f, Π_0 − Π_i)`.
pub fn momentum_boundary_residual(pi_0: &Vec3, pi_n: &Vec3, pi_i: &Vec3, pi_f: &Vec3) -> Vector6<f64> {
    let top = pi_n - pi_f;
    let bottom = pi_0 - pi_i;
    Vector6::new(top.x, top.y, top.z, bottom.x, bottom.y, bottom.z)
}

/// Momentum-bound multipliers from the β-free costate residual `xi0`:
/// `β^i = −xi0^i / (h Π^i)` for each queried component, zero elsewhere.
pub fn slack_beta_from_residual(
    xi0: &Vec3,
    pi_k: &Vec3,
    h: f64,
    components: [bool; 3],
) -> Result<Vec3, OptimalityError> {
    let mut beta = Vec3::zeros();
    for i in 0..3 {
        if !components[i] {
            continue;
        }
        if pi_k[i] == 0.0 {
            return Err(OptimalityError::DivisionByZeroMomentum { component: i });
        }
        beta[i] = -xi0[i] / (h * pi_k[i]);
    }
    Ok(beta)
}

/// Recovers `β_k` so that the costate row with the `h β⊙Π` term vanishes.
#[allow(clippy::too_many_arguments)]
pub fn compute_slack_beta(
    pi_k: &Vec3,
    lambda_bar_prev: &Vec3,
    lambda_bar_k: &Vec3,
    mu_bar0: &Vec3,
    q_k: &Rotation,
    h: f64,
    inertia: &InertiaModel,
    components: [bool; 3],
) -> Result<Vec3, OptimalityError> {
    let xi0 = xi_residual(
        pi_k,
        lambda_bar_prev,
        lambda_bar_k,
        mu_bar0,
        q_k,
        &Vec3::zeros(),
        h,
        inertia,
    )?;
    slack_beta_from_residual(&xi0, pi_k, h, components)
}
