//! Multiple-shooting Newton solver for the reduced boundary value problem.
//!
//! The unknown is `X = (Π_0, λ̄_0, …, Π_N, λ̄_N, μ̄_0)` and the matching
//! conditions stack, for `k = 0..N−1`, the momentum row `Σ_{k+1}` and the
//! costate row `Ξ_{k+1}`, followed by the momentum boundary rows and the
//! orientation constraint.

mod active;
mod assembly;
mod diagnostic;
mod solver;
mod staircase;
mod vector;

pub use active::{
    enforce_active_constraints, identify_active_set, project_feasible, update_costates_after_projection, ActiveEntry,
    ActiveSet, BoundSide, CONTACT_RTOL,
};
pub use assembly::{assemble_jacobian, assemble_matching, StepGeometry};
pub use diagnostic::{momentum_only_jacobian, momentum_only_jacobian_diagnostic};
pub use solver::{
    modified_shooting_solve, newton_solve, quadratic_tail_fit, LinearSolverKind, ModifiedSolution, SolveFailure,
    SolverOptions, SolverReport, TailFit, CYCLE_LIMIT,
};
pub use staircase::solve_staircase;
pub use vector::ShootingVector;

use crate::dynamics::DynamicsError;
use crate::optimality::OptimalityError;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ShootingError {
    #[error("shooting vector has length {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("dynamics failure at step {step}: {source}")]
    DynamicsFailure {
        step: usize,
        #[source]
        source: DynamicsError,
    },
    #[error("orientation constraint undefined: {0}")]
    Orientation(OptimalityError),
    #[error("momentum bound multiplier undefined at step {step}: {source}")]
    Slack {
        step: usize,
        #[source]
        source: OptimalityError,
    },
    #[error("Newton matrix is numerically singular at iteration {iteration}")]
    SingularJacobian { iteration: usize },
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    MaxIterationsExceeded { iterations: usize, residual: f64 },
    #[error("active set cycled between two sets for {cycles} iterations")]
    ActiveSetCycling { cycles: usize },
    #[error("non-finite residual at iteration {iteration}")]
    NonFinite { iteration: usize },
}

impl ShootingError {
    /// Short machine-readable class name used in reports.
    pub fn class(&self) -> &'static str {
        match self {
            ShootingError::DimensionMismatch { .. } => "DimensionMismatch",
            ShootingError::DynamicsFailure { .. } => "DynamicsFailure",
            ShootingError::Orientation(_) => "OrientationUndefined",
            ShootingError::Slack { .. } => "SlackUndefined",
            ShootingError::SingularJacobian { .. } => "SingularJacobian",
            ShootingError::MaxIterationsExceeded { .. } => "MaxIterationsExceeded",
            ShootingError::ActiveSetCycling { .. } => "ActiveSetCycling",
            ShootingError::NonFinite { .. } => "NonFinite",
        }
    }
}
