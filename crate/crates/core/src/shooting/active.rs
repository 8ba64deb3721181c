use super::{ShootingError, ShootingVector};
use crate::dynamics::{sensitivity_matrices, solve_relative_rotation};
use crate::optimality::{slack_beta_from_residual, xi_residual_with, Bounds};
use crate::problem::ManeuverProblem;
use crate::so3::{Rotation, Vec3};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

/// Momenta within this relative distance of a bound count as touching it.
pub const CONTACT_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundSide {
    Upper,
    Lower,
}

impl BoundSide {
    pub fn sign(self) -> f64 {
        match self {
            BoundSide::Upper => 1.0,
            BoundSide::Lower => -1.0,
        }
    }
}

/// One momentum component held on its bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ActiveEntry {
    pub step: usize,
    pub axis: usize,
    pub side: BoundSide,
    /// Multiplier `β_k^i` at identification time (always `> 0`).
    pub beta: f64,
    /// `Π_k^i` at identification time.
    pub momentum: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ActiveSet {
    pub entries: Vec<ActiveEntry>,
}

impl ActiveSet {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn side(&self, step: usize, axis: usize) -> Option<BoundSide> {
        self.entries
            .iter()
            .find(|e| e.step == step && e.axis == axis)
            .map(|e| e.side)
    }

    /// Index pattern without multiplier values, for cycle detection.
    pub fn signature(&self) -> Vec<(usize, usize, BoundSide)> {
        self.entries.iter().map(|e| (e.step, e.axis, e.side)).collect()
    }

    /// Matching-condition row replaced by the entry's bound equation.
    pub fn row(entry: &ActiveEntry) -> usize {
        6 * (entry.step - 1) + 3 + entry.axis
    }
}

/// `Π̃_k^i = sgn(Π_k^i) min{b^i, |Π_k^i|}` on every momentum block.
pub fn project_feasible(x: &ShootingVector, bounds: &Bounds) -> ShootingVector {
    let mut out = x.clone();
    for k in 0..=x.steps() {
        let pi = x.pi(k);
        let clamped = Vec3::from_fn(|i, _| pi[i].clamp(-bounds.b[i], bounds.b[i]));
        if clamped != pi {
            out.set_pi(k, &clamped);
        }
    }
    out
}

/// Rewrites `λ̄_{k−1}^i = −u^i` wherever `|u^i| < c^i`, with
/// `u = (Π̃_k − F_{k−1}ᵀ Π̃_{k−1}) / h` the control implied by the projected
/// momenta. Only steps where the projection moved `Π_{k−1}` or `Π_k` are
/// touched; elsewhere the stored costates already encode the iterate.
pub fn update_costates_after_projection(
    x_projected: &ShootingVector,
    x_before: &ShootingVector,
    problem: &ManeuverProblem,
) -> Result<ShootingVector, ShootingError> {
    let mut out = x_projected.clone();
    let h = problem.h;
    for k in 1..=x_projected.steps() {
        let moved = x_projected.pi(k) != x_before.pi(k) || x_projected.pi(k - 1) != x_before.pi(k - 1);
        if !moved {
            continue;
        }
        let pi_prev = x_projected.pi(k - 1);
        let sol = solve_relative_rotation(&pi_prev, h, &problem.inertia)
            .map_err(|source| ShootingError::DynamicsFailure { step: k - 1, source })?;
        let u = (x_projected.pi(k) - sol.f.matrix().transpose() * pi_prev) / h;
        let mut lam = x_projected.lambda_bar(k - 1);
        for i in 0..3 {
            if u[i].abs() < problem.bounds.c[i] {
                lam[i] = -u[i];
            }
        }
        out.set_lambda_bar(k - 1, &lam);
    }
    Ok(out)
}

/// Interior momenta `Π_k`, `k = 1..N−1`, that touch a bound and whose
/// multiplier `β_k^i = −Ξ_k^i / (h Π_k^i)` is strictly positive.
pub fn identify_active_set(
    x_projected: &ShootingVector,
    problem: &ManeuverProblem,
) -> Result<ActiveSet, ShootingError> {
    let steps = x_projected.steps();
    let h = problem.h;
    let b = problem.bounds.b;
    let mu = x_projected.mu_bar0();
    let mut q = Rotation::identity();
    let mut entries = Vec::new();
    for k in 1..steps {
        let pi = x_projected.pi(k);
        let fail = |source| ShootingError::DynamicsFailure { step: k, source };
        let sol = solve_relative_rotation(&pi, h, &problem.inertia).map_err(fail)?;
        q = q.compose(&sol.f);
        let contact: [bool; 3] = std::array::from_fn(|i| pi[i].abs() >= b[i] * (1.0 - CONTACT_RTOL));
        if !contact.iter().any(|&c| c) {
            continue;
        }
        let (_, n) = sensitivity_matrices(&sol.f, &problem.inertia, h).map_err(fail)?;
        let xi0 = xi_residual_with(
            &sol.f,
            &n,
            &pi,
            &x_projected.lambda_bar(k - 1),
            &x_projected.lambda_bar(k),
            &mu,
            &q,
            &Vec3::zeros(),
            h,
        );
        let beta = slack_beta_from_residual(&xi0, &pi, h, contact)
            .map_err(|source| ShootingError::Slack { step: k, source })?;
        for i in 0..3 {
            if contact[i] && beta[i] > 0.0 {
                entries.push(ActiveEntry {
                    step: k,
                    axis: i,
                    side: if pi[i] > 0.0 {
                        BoundSide::Upper
                    } else {
                        BoundSide::Lower
                    },
                    beta: beta[i],
                    momentum: pi[i],
                    bound: b[i],
                });
            }
        }
    }
    Ok(ActiveSet { entries })
}

pub(crate) fn enforce_residual(active: &ActiveSet, residual: &mut DVector<f64>) {
    for e in &active.entries {
        residual[ActiveSet::row(e)] = e.momentum.abs() - e.bound;
    }
}

/// Replaces the costate row of every active entry by `|Π_k^i| − b^i` and its
/// Jacobian row by `sgn(Π_k^i)` on `Π_k^i`. The system size is unchanged.
pub fn enforce_active_constraints(
    active: &ActiveSet,
    mut residual: DVector<f64>,
    mut jacobian: DMatrix<f64>,
) -> (DVector<f64>, DMatrix<f64>) {
    enforce_residual(active, &mut residual);
    for e in &active.entries {
        let row = ActiveSet::row(e);
        jacobian.row_mut(row).fill(0.0);
        jacobian[(row, ShootingVector::pi_offset(e.step) + e.axis)] = e.side.sign();
    }
    (residual, jacobian)
}
