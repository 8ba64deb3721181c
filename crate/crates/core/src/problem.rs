use crate::dynamics::InertiaModel;
use crate::optimality::Bounds;
use crate::so3::{Rotation, Vec3};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProblemError {
    #[error("horizon must have at least 2 steps, got {0}")]
    HorizonTooShort(usize),
    #[error("step length must be positive and finite, got {0}")]
    InvalidStep(f64),
    #[error("{which} momentum {value:?} lies outside the momentum bound")]
    BoundaryOutsideBounds { which: &'static str, value: [f64; 3] },
    #[error("non-finite boundary momentum")]
    NonFinite,
}

/// Data of one fixed-horizon, energy-optimal reorientation.
#[derive(Debug, Clone, PartialEq)]
pub struct ManeuverProblem {
    pub inertia: InertiaModel,
    pub r_initial: Rotation,
    pub r_final: Rotation,
    pub pi_initial: Vec3,
    pub pi_final: Vec3,
    pub bounds: Bounds,
    /// Number of steps `N`.
    pub steps: usize,
    /// Step length `h` in seconds.
    pub h: f64,
}

impl ManeuverProblem {
    pub fn validate(&self) -> Result<(), ProblemError> {
        if self.steps < 2 {
            return Err(ProblemError::HorizonTooShort(self.steps));
        }
        if !(self.h.is_finite() && self.h > 0.0) {
            return Err(ProblemError::InvalidStep(self.h));
        }
        for (which, pi) in [("initial", &self.pi_initial), ("final", &self.pi_final)] {
            if pi.iter().any(|v| !v.is_finite()) {
                return Err(ProblemError::NonFinite);
            }
            if (0..3).any(|i| pi[i].abs() > self.bounds.b[i]) {
                return Err(ProblemError::BoundaryOutsideBounds {
                    which,
                    value: [pi.x, pi.y, pi.z],
                });
            }
        }
        Ok(())
    }

    pub fn duration(&self) -> f64 {
        self.steps as f64 * self.h
    }
}
