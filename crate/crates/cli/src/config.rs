//! Maneuver configuration files (JSON).
//!
//! ```json
//! {
//!   "inertia": [800, 1200, 1000],
//!   "initial_attitude": { "axis": [1, 0, 0], "angle": 0 },
//!   "final_attitude": { "axis": [1, 1, 1], "angle": 90, "unit": "deg" },
//!   "pi_initial": [30, -10, 10],
//!   "pi_final": [0, 0, 0],
//!   "h": 0.1,
//!   "duration": 19,
//!   "c": [20, 20, 20],
//!   "b": [70, 70, 70]
//! }
//! ```
//!
//! `steps` may be given instead of `duration`; optional keys are `tol`,
//! `max_iter`, `damping`, `linear_solver` and `output_dir`. Attitudes may
//! also be written as `{ "quaternion": [q0, q1, q2, q3] }` (scalar first).

use attitude_core::shooting::{LinearSolverKind, SolverOptions};
use attitude_core::{Bounds, InertiaModel, ManeuverProblem, Rotation, UnitQuaternion, Vec3};
use log::info;
use serde::Deserialize;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid field `{field}`: {message}")]
    Validation { field: String, message: String },
}

fn invalid(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Validation {
        field: field.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "lowercase")]
pub enum AngleUnit {
    #[default]
    Rad,
    Deg,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum RawAttitude {
    AxisAngle {
        axis: [f64; 3],
        angle: f64,
        #[serde(default)]
        unit: AngleUnit,
    },
    Quaternion {
        quaternion: [f64; 4],
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum RawInertia {
    Principal([f64; 3]),
    Matrix([[f64; 3]; 3]),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    inertia: Option<RawInertia>,
    initial_attitude: Option<RawAttitude>,
    final_attitude: Option<RawAttitude>,
    pi_initial: Option<[f64; 3]>,
    pi_final: Option<[f64; 3]>,
    h: Option<f64>,
    steps: Option<usize>,
    duration: Option<f64>,
    c: Option<[f64; 3]>,
    b: Option<[f64; 3]>,
    tol: Option<f64>,
    max_iter: Option<usize>,
    damping: Option<f64>,
    linear_solver: Option<LinearSolverKind>,
    output_dir: Option<PathBuf>,
}

/// A validated maneuver description with solver settings.
#[derive(Debug, Clone, PartialEq)]
pub struct ManeuverConfig {
    pub problem: ManeuverProblem,
    pub solver: SolverOptions,
    pub output_dir: Option<PathBuf>,
}

fn required<T>(v: Option<T>, field: &str) -> Result<T, ConfigError> {
    v.ok_or_else(|| invalid(field, "missing"))
}

fn finite3(v: [f64; 3], field: &str) -> Result<Vec3, ConfigError> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(invalid(field, "entries must be finite"));
    }
    Ok(Vec3::from(v))
}

fn positive3(v: [f64; 3], field: &str) -> Result<Vec3, ConfigError> {
    let v = finite3(v, field)?;
    if v.iter().any(|x| *x <= 0.0) {
        return Err(invalid(field, "entries must be positive"));
    }
    Ok(v)
}

fn inertia(raw: RawInertia) -> Result<InertiaModel, ConfigError> {
    let diag = match raw {
        RawInertia::Principal(d) => d,
        RawInertia::Matrix(m) => {
            for (i, row) in m.iter().enumerate() {
                for (j, v) in row.iter().enumerate() {
                    if i != j && *v != 0.0 {
                        return Err(invalid(
                            "inertia",
                            "only principal-axis (diagonal) inertia is supported",
                        ));
                    }
                }
            }
            [m[0][0], m[1][1], m[2][2]]
        }
    };
    InertiaModel::new(diag[0], diag[1], diag[2]).map_err(|e| invalid("inertia", e.to_string()))
}

fn attitude(raw: RawAttitude, field: &str) -> Result<Rotation, ConfigError> {
    match raw {
        RawAttitude::AxisAngle { axis, angle, unit } => {
            let axis = finite3(axis, field)?;
            if !angle.is_finite() {
                return Err(invalid(field, "angle must be finite"));
            }
            let angle = match unit {
                AngleUnit::Rad => angle,
                AngleUnit::Deg => angle.to_radians(),
            };
            let norm = axis.norm();
            if angle == 0.0 {
                return Ok(Rotation::identity());
            }
            if norm == 0.0 {
                return Err(invalid(field, "rotation axis is zero"));
            }
            if (norm - 1.0).abs() > 1e-12 {
                info!("{field}: axis {:?} normalized to unit length", axis.as_slice());
            }
            Ok(Rotation::from_axis_angle(&(axis / norm), angle))
        }
        RawAttitude::Quaternion { quaternion } => {
            let norm = quaternion.iter().map(|v| v * v).sum::<f64>().sqrt();
            if !norm.is_finite() || norm == 0.0 {
                return Err(invalid(field, "quaternion must be finite and nonzero"));
            }
            if (norm - 1.0).abs() > 1e-12 {
                info!("{field}: quaternion normalized to unit length");
            }
            Ok(UnitQuaternion::normalized(quaternion).to_rotation())
        }
    }
}

impl ManeuverConfig {
    pub fn from_json_str(text: &str) -> Result<Self, ConfigError> {
        let raw: RawConfig = serde_json::from_str(text).map_err(|e| ConfigError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        Self::from_raw(raw)
    }

    fn from_raw(raw: RawConfig) -> Result<Self, ConfigError> {
        let inertia = inertia(required(raw.inertia, "inertia")?)?;
        let r_initial = attitude(required(raw.initial_attitude, "initial_attitude")?, "initial_attitude")?;
        let r_final = attitude(required(raw.final_attitude, "final_attitude")?, "final_attitude")?;
        let pi_initial = finite3(required(raw.pi_initial, "pi_initial")?, "pi_initial")?;
        let pi_final = finite3(required(raw.pi_final, "pi_final")?, "pi_final")?;
        let h = required(raw.h, "h")?;
        if !(h.is_finite() && h > 0.0) {
            return Err(invalid("h", "step length must be positive"));
        }
        let steps = match (raw.steps, raw.duration) {
            (Some(n), None) => n,
            (None, Some(t)) => {
                if !(t.is_finite() && t > 0.0) {
                    return Err(invalid("duration", "must be positive"));
                }
                (t / h).round() as usize
            }
            (Some(n), Some(t)) => {
                if (t / h).round() as usize != n {
                    return Err(invalid(
                        "steps",
                        format!("{n} steps disagree with duration {t} at h = {h}"),
                    ));
                }
                n
            }
            (None, None) => return Err(invalid("steps", "give either `steps` or `duration`")),
        };
        if steps < 2 {
            return Err(invalid("steps", format!("need at least 2 steps, got {steps}")));
        }
        let c = positive3(required(raw.c, "c")?, "c")?;
        let b = positive3(required(raw.b, "b")?, "b")?;
        for (field, pi) in [("pi_initial", &pi_initial), ("pi_final", &pi_final)] {
            if (0..3).any(|i| pi[i].abs() > b[i]) {
                return Err(invalid(field, "boundary momentum lies outside the momentum bound b"));
            }
        }
        let defaults = SolverOptions::default();
        let tol = raw.tol.unwrap_or(defaults.tol);
        if !(tol.is_finite() && tol > 0.0) {
            return Err(invalid("tol", "must be positive"));
        }
        let max_iter = raw.max_iter.unwrap_or(defaults.max_iter);
        if max_iter == 0 {
            return Err(invalid("max_iter", "must be at least 1"));
        }
        let damping = raw.damping.unwrap_or(defaults.damping);
        if !(damping > 0.0 && damping <= 1.0) {
            return Err(invalid("damping", "must lie in (0, 1]"));
        }
        Ok(Self {
            problem: ManeuverProblem {
                inertia,
                r_initial,
                r_final,
                pi_initial,
                pi_final,
                bounds: Bounds { c, b },
                steps,
                h,
            },
            solver: SolverOptions {
                tol,
                max_iter,
                damping,
                linear_solver: raw.linear_solver.unwrap_or_default(),
            },
            output_dir: raw.output_dir,
        })
    }
}

pub fn load_config(path: &Path) -> Result<ManeuverConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    ManeuverConfig::from_json_str(&text)
}
