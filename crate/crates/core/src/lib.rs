//! Energy-optimal attitude maneuvers of a rigid spacecraft under torque and
//! momentum bounds.
//!
//! The attitude dynamics are a discrete-mechanics model on SO(3). The
//! first-order optimality conditions, reduced to momentum and comomentum
//! variables, form a two-point boundary value problem that is solved with a
//! multiple-shooting Newton method. Momentum bounds are handled by a
//! projection / active-set variant that keeps the system size fixed.

pub mod dynamics;
pub mod linalg;
pub mod optimality;
pub mod problem;
pub mod shooting;
pub mod so3;

pub use dynamics::{DynamicsError, DynamicsState, InertiaModel, RelativeRotationSolution};
pub use optimality::{Bounds, OptimalityError};
pub use problem::{ManeuverProblem, ProblemError};
pub use so3::{Mat3, Rotation, So3Error, UnitQuaternion, Vec3};
