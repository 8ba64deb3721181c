//! Discrete rigid-body dynamics on SO(3).
//!
//! One step of the model maps `(R_k, Π_k)` to `(R_k F_k, F_kᵀ Π_k + h u_k)`,
//! where the relative rotation `F_k` solves the implicit relation
//! `hat(h Π_k) = F_k J_d − J_d F_kᵀ`. The implicit relation is solved in
//! quaternion form by a 4×4 Newton iteration, which also yields the
//! momentum sensitivities `∂q/∂Π` and `∂F/∂Π` through the implicit
//! function theorem.

use crate::linalg::{condition_number3, solve_fixed, solve_vec};
use crate::so3::{hat, quat_matrix, quat_matrix_partials, Mat3, Rotation, So3Error, UnitQuaternion, Vec3};
use nalgebra::{Matrix4, Matrix4x3, Vector4};
use thiserror::Error;

/// Absolute tolerance on every component of the quaternion residual.
pub const IMPLICIT_TOL: f64 = 1e-12;
pub const IMPLICIT_MAX_ITER: usize = 50;
/// Trace operators with a larger 2-norm condition number are treated as singular.
pub const TRACE_OPERATOR_MAX_COND: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("invalid inertia: {0}")]
    InvalidInertia(String),
    #[error("step length must be positive and finite, got {0}")]
    InvalidStep(f64),
    #[error("implicit rotation solve did not converge in {iterations} iterations (residual {residual:e})")]
    NewtonDiverged { iterations: usize, residual: f64 },
    #[error("quaternion Newton matrix is numerically singular")]
    SingularNewtonStep,
    #[error("trace operator is numerically singular (condition number {0:e})")]
    SingularTraceOperator(f64),
    #[error(transparent)]
    So3(#[from] So3Error),
}

/// Diagonal principal inertia `J = diag(Jx, Jy, Jz)` together with the
/// derived nonstandard inertia `J_d = ½ diag(−Jx+Jy+Jz, Jx−Jy+Jz, Jx+Jy−Jz)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InertiaModel {
    j: Vec3,
    jd: Vec3,
}

impl InertiaModel {
    /// Requires positive moments satisfying the strict triangle inequalities.
    pub fn new(jx: f64, jy: f64, jz: f64) -> Result<Self, DynamicsError> {
        let j = Vec3::new(jx, jy, jz);
        if j.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(DynamicsError::InvalidInertia(format!(
                "principal moments must be positive, got ({jx}, {jy}, {jz})"
            )));
        }
        let jd = Vec3::new(-jx + jy + jz, jx - jy + jz, jx + jy - jz) * 0.5;
        if jd.iter().any(|d| *d <= 0.0) {
            return Err(DynamicsError::InvalidInertia(format!(
                "moments ({jx}, {jy}, {jz}) violate the triangle inequality"
            )));
        }
        Ok(Self { j, jd })
    }

    pub fn principal(&self) -> Vec3 {
        self.j
    }

    pub fn j_matrix(&self) -> Mat3 {
        Mat3::from_diagonal(&self.j)
    }

    pub fn jd_diagonal(&self) -> Vec3 {
        self.jd
    }

    pub fn jd_matrix(&self) -> Mat3 {
        Mat3::from_diagonal(&self.jd)
    }

    /// `J_d` diagonal sorted ascending, `d1 ≤ d2 ≤ d3`.
    pub fn jd_sorted(&self) -> [f64; 3] {
        let mut d = [self.jd.x, self.jd.y, self.jd.z];
        d.sort_by(f64::total_cmp);
        d
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynamicsState {
    pub r: Rotation,
    pub pi: Vec3,
}

/// Accepted root of the implicit quaternion equations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelativeRotationSolution {
    pub f: Rotation,
    pub q: UnitQuaternion,
    pub newton_iters: usize,
    pub residual_norm: f64,
}

fn check_step(h: f64) -> Result<(), DynamicsError> {
    if h.is_finite() && h > 0.0 {
        Ok(())
    } else {
        Err(DynamicsError::InvalidStep(h))
    }
}

/// Residual of the quaternion form of the implicit relation.
pub fn implicit_residual(q: &[f64; 4], pi: &Vec3, h: f64, inertia: &InertiaModel) -> Vector4<f64> {
    let [q0, q1, q2, q3] = *q;
    let (jx, jy, jz) = (inertia.j.x, inertia.j.y, inertia.j.z);
    Vector4::new(
        2.0 * q2 * q3 * (jz - jy) + 2.0 * q0 * q1 * jx - h * pi.x,
        2.0 * q1 * q3 * (jx - jz) + 2.0 * q0 * q2 * jy - h * pi.y,
        2.0 * q1 * q2 * (jy - jx) + 2.0 * q0 * q3 * jz - h * pi.z,
        q0 * q0 + q1 * q1 + q2 * q2 + q3 * q3 - 1.0,
    )
}

/// `∂g/∂q` of [`implicit_residual`].
pub fn implicit_jacobian(q: &[f64; 4], inertia: &InertiaModel) -> Matrix4<f64> {
    let [q0, q1, q2, q3] = *q;
    let (jx, jy, jz) = (inertia.j.x, inertia.j.y, inertia.j.z);
    Matrix4::new(
        2.0 * q1 * jx,
        2.0 * q0 * jx,
        2.0 * q3 * (jz - jy),
        2.0 * q2 * (jz - jy),
        2.0 * q2 * jy,
        2.0 * q3 * (jx - jz),
        2.0 * q0 * jy,
        2.0 * q1 * (jx - jz),
        2.0 * q3 * jz,
        2.0 * q2 * (jy - jx),
        2.0 * q1 * (jy - jx),
        2.0 * q0 * jz,
        2.0 * q0,
        2.0 * q1,
        2.0 * q2,
        2.0 * q3,
    )
}

/// Solves for the relative rotation starting from the identity quaternion.
pub fn solve_relative_rotation(
    pi: &Vec3,
    h: f64,
    inertia: &InertiaModel,
) -> Result<RelativeRotationSolution, DynamicsError> {
    solve_relative_rotation_from(pi, h, inertia, &UnitQuaternion::identity())
}

/// Solves for the relative rotation with Newton's method from `guess`.
pub fn solve_relative_rotation_from(
    pi: &Vec3,
    h: f64,
    inertia: &InertiaModel,
    guess: &UnitQuaternion,
) -> Result<RelativeRotationSolution, DynamicsError> {
    check_step(h)?;
    let mut q = guess.as_array();
    let mut residual = implicit_residual(&q, pi, h, inertia);
    let mut iters = 0;
    while residual.amax() > IMPLICIT_TOL {
        if iters == IMPLICIT_MAX_ITER || !residual.amax().is_finite() {
            return Err(DynamicsError::NewtonDiverged {
                iterations: iters,
                residual: residual.amax(),
            });
        }
        let jac = implicit_jacobian(&q, inertia);
        let step = solve_vec(&jac, &(-residual)).ok_or(DynamicsError::SingularNewtonStep)?;
        for (qi, di) in q.iter_mut().zip(step.iter()) {
            *qi += di;
        }
        residual = implicit_residual(&q, pi, h, inertia);
        iters += 1;
    }
    // polish to roundoff; Newton is quadratic here so one or two steps suffice
    for _ in 0..2 {
        let jac = implicit_jacobian(&q, inertia);
        let Some(step) = solve_vec(&jac, &(-residual)) else {
            break;
        };
        let trial: [f64; 4] = std::array::from_fn(|n| q[n] + step[n]);
        let trial_residual = implicit_residual(&trial, pi, h, inertia);
        if trial_residual.amax() >= residual.amax() {
            break;
        }
        q = trial;
        residual = trial_residual;
    }
    // g is even in q, so flipping the sign keeps the residual
    if q[0] < 0.0 {
        q = q.map(|v| -v);
    }
    let f = Rotation::new(quat_matrix(&q))?;
    let q = UnitQuaternion::new(q)?;
    Ok(RelativeRotationSolution {
        f,
        q,
        newton_iters: iters,
        residual_norm: residual.amax(),
    })
}

/// `∂q/∂Π` from `(∂g/∂q)(∂q/∂Π) = [h I; 0]`.
pub fn quaternion_sensitivity(
    sol: &RelativeRotationSolution,
    h: f64,
    inertia: &InertiaModel,
) -> Result<Matrix4x3<f64>, DynamicsError> {
    check_step(h)?;
    let jac = implicit_jacobian(&sol.q.as_array(), inertia);
    let mut rhs = Matrix4x3::zeros();
    for i in 0..3 {
        rhs[(i, i)] = h;
    }
    solve_fixed(&jac, &rhs).ok_or(DynamicsError::SingularNewtonStep)
}

/// `∂F/∂Π^i = Σ_n (∂F/∂q_n)(∂q_n/∂Π^i)` for `i = 1, 2, 3`.
pub fn rotation_sensitivity(sol: &RelativeRotationSolution, dq_dpi: &Matrix4x3<f64>) -> [Mat3; 3] {
    let partials = quat_matrix_partials(&sol.q.as_array());
    std::array::from_fn(|i| (0..4).fold(Mat3::zeros(), |acc, n| acc + partials[n] * dq_dpi[(n, i)]))
}

/// One step of the controlled dynamics, solving the implicit relation from identity.
pub fn step_forward(
    state: &DynamicsState,
    u: &Vec3,
    h: f64,
    inertia: &InertiaModel,
) -> Result<DynamicsState, DynamicsError> {
    let sol = solve_relative_rotation(&state.pi, h, inertia)?;
    Ok(advance(state, &sol, u, h))
}

/// Applies an already-solved relative rotation: `R' = R F`, `Π' = Fᵀ Π + h u`.
pub fn advance(state: &DynamicsState, sol: &RelativeRotationSolution, u: &Vec3, h: f64) -> DynamicsState {
    DynamicsState {
        r: state.r.compose(&sol.f),
        pi: sol.f.matrix().transpose() * state.pi + u * h,
    }
}

/// Propagates a control sequence, warm-starting each implicit solve from the
/// previous step's quaternion. Returns `controls.len() + 1` states.
pub fn propagate(
    initial: &DynamicsState,
    controls: &[Vec3],
    h: f64,
    inertia: &InertiaModel,
) -> Result<Vec<DynamicsState>, DynamicsError> {
    let mut states = Vec::with_capacity(controls.len() + 1);
    states.push(*initial);
    let mut guess = UnitQuaternion::identity();
    for u in controls {
        let cur = states[states.len() - 1];
        let sol = solve_relative_rotation_from(&cur.pi, h, inertia, &guess)?;
        guess = sol.q;
        states.push(advance(&cur, &sol, u, h));
    }
    Ok(states)
}

/// `trace(F J_d) I − F J_d`.
pub fn trace_operator(f: &Rotation, inertia: &InertiaModel) -> Mat3 {
    let fjd = f.matrix() * inertia.jd_matrix();
    Mat3::identity() * fjd.trace() - fjd
}

/// Momentum-variation matrices `B = h Fᵀ T⁻¹` and `N = Bᵀ/h = T⁻ᵀ F`,
/// with `T` the trace operator.
pub fn sensitivity_matrices(f: &Rotation, inertia: &InertiaModel, h: f64) -> Result<(Mat3, Mat3), DynamicsError> {
    check_step(h)?;
    let t = trace_operator(f, inertia);
    let cond = condition_number3(&t);
    if !(cond < TRACE_OPERATOR_MAX_COND) {
        return Err(DynamicsError::SingularTraceOperator(cond));
    }
    let t_inv = solve_fixed(&t, &Mat3::identity()).ok_or(DynamicsError::SingularTraceOperator(cond))?;
    let b = f.matrix().transpose() * t_inv * h;
    let n = b.transpose() / h;
    Ok((b, n))
}

/// Cosine threshold `sqrt((2 d3 + d2 − d1) / (2 (d3 + d2)))` over the sorted `J_d` diagonal.
pub fn cosine_threshold(inertia: &InertiaModel) -> f64 {
    let [d1, d2, d3] = inertia.jd_sorted();
    ((2.0 * d3 + d2 - d1) / (2.0 * (d3 + d2))).sqrt()
}

/// Whether `cos(‖ξ‖/2)` lies below [`cosine_threshold`]. Diagnostic only;
/// invertibility is decided by the condition number of the trace operator.
pub fn lemma1_sufficient_condition(xi: &Vec3, inertia: &InertiaModel) -> bool {
    (0.5 * xi.norm()).cos() < cosine_threshold(inertia)
}

/// `F − h N hat(Fᵀ Π)`, the momentum block of the costate recursion.
pub fn costate_transition(f: &Rotation, n: &Mat3, pi: &Vec3, h: f64) -> Mat3 {
    f.matrix() - n * hat(&(f.matrix().transpose() * pi)) * h
}
