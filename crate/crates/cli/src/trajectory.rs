//! Trajectory records and their CSV form.
//!
//! Columns: `t,Pi1,Pi2,Pi3,u1,u2,u3,lam1,lam2,lam3,q0,q1,q2,q3,active1,active2,active3`.
//! Numbers are written with 17 significant digits. The control of the last
//! row is empty, as are costates of simulated trajectories. Active flags are
//! `1` (upper bound), `-1` (lower bound) or `0`.

use attitude_core::dynamics::{solve_relative_rotation, DynamicsError};
use attitude_core::optimality::optimal_control;
use attitude_core::shooting::{ActiveSet, BoundSide, ShootingVector};
use attitude_core::{ManeuverProblem, Rotation, Vec3};
use std::io::{Read, Write};
use std::path::Path;
use thiserror::Error;

pub const HEADER: [&str; 17] = [
    "t", "Pi1", "Pi2", "Pi3", "u1", "u2", "u3", "lam1", "lam2", "lam3", "q0", "q1", "q2", "q3", "active1", "active2",
    "active3",
];

#[derive(Debug, Error)]
pub enum TrajectoryError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("row {row}: {message}")]
    Format { row: usize, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    pub t: f64,
    pub pi: Vec3,
    pub u: Option<Vec3>,
    pub lambda_bar: Option<Vec3>,
    pub q: [f64; 4],
    pub active: [i8; 3],
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrajectoryRecord {
    pub rows: Vec<TrajectoryRow>,
}

pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

impl TrajectoryRecord {
    /// Trajectory encoded by a solved shooting vector. Attitudes are
    /// accumulated as `R_{k+1} = R_k F(Π_k)` from `R_i`.
    pub fn from_solution(
        x: &ShootingVector,
        active: &ActiveSet,
        problem: &ManeuverProblem,
    ) -> Result<Self, DynamicsError> {
        let steps = problem.steps;
        let mut r = problem.r_initial;
        let mut rows = Vec::with_capacity(steps + 1);
        for k in 0..=steps {
            let lam = x.lambda_bar(k);
            let flags = std::array::from_fn(|i| match active.side(k, i) {
                Some(BoundSide::Upper) => 1,
                Some(BoundSide::Lower) => -1,
                None => 0,
            });
            rows.push(TrajectoryRow {
                t: k as f64 * problem.h,
                pi: x.pi(k),
                u: (k < steps).then(|| optimal_control(&lam, &problem.bounds)),
                lambda_bar: Some(lam),
                q: r.to_quaternion().as_array(),
                active: flags,
            });
            if k < steps {
                let f = solve_relative_rotation(&x.pi(k), problem.h, &problem.inertia)?.f;
                r = r.compose(&f);
            }
        }
        Ok(Self { rows })
    }

    /// Trajectory of a forward simulation (no costates, no active flags).
    pub fn from_states(states: &[(Rotation, Vec3)], controls: &[Vec3], h: f64) -> Self {
        let rows = states
            .iter()
            .enumerate()
            .map(|(k, (r, pi))| TrajectoryRow {
                t: k as f64 * h,
                pi: *pi,
                u: controls.get(k).copied(),
                lambda_bar: None,
                q: r.to_quaternion().as_array(),
                active: [0; 3],
            })
            .collect();
        Self { rows }
    }

    pub fn controls(&self) -> Vec<Vec3> {
        self.rows.iter().filter_map(|r| r.u).collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), TrajectoryError> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(HEADER)?;
        let opt = |v: Option<Vec3>, i: usize| v.map(|v| format_f64(v[i])).unwrap_or_default();
        for row in &self.rows {
            let mut rec = vec![format_f64(row.t)];
            rec.extend((0..3).map(|i| format_f64(row.pi[i])));
            rec.extend((0..3).map(|i| opt(row.u, i)));
            rec.extend((0..3).map(|i| opt(row.lambda_bar, i)));
            rec.extend(row.q.iter().map(|v| format_f64(*v)));
            rec.extend(row.active.iter().map(|v| v.to_string()));
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_csv_file(&self, path: &Path) -> Result<(), TrajectoryError> {
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self, TrajectoryError> {
        let mut rdr = csv::Reader::from_reader(r);
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != HEADER {
            return Err(TrajectoryError::Format {
                row: 0,
                message: "unexpected header".into(),
            });
        }
        let mut rows = Vec::new();
        for (n, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let row = n + 1;
            let num = |i: usize| -> Result<Option<f64>, TrajectoryError> {
                let s = rec.get(i).unwrap_or("").trim();
                if s.is_empty() {
                    return Ok(None);
                }
                s.parse().map(Some).map_err(|_| TrajectoryError::Format {
                    row,
                    message: format!("column {} is not a number", HEADER[i]),
                })
            };
            let req = |i: usize| -> Result<f64, TrajectoryError> {
                num(i)?.ok_or_else(|| TrajectoryError::Format {
                    row,
                    message: format!("column {} is empty", HEADER[i]),
                })
            };
            let vec3 = |i: usize| -> Result<Option<Vec3>, TrajectoryError> {
                match (num(i)?, num(i + 1)?, num(i + 2)?) {
                    (Some(a), Some(b), Some(c)) => Ok(Some(Vec3::new(a, b, c))),
                    (None, None, None) => Ok(None),
                    _ => Err(TrajectoryError::Format {
                        row,
                        message: format!("partially empty group starting at {}", HEADER[i]),
                    }),
                }
            };
            let flag = |i: usize| -> Result<i8, TrajectoryError> {
                rec.get(i)
                    .unwrap_or("")
                    .trim()
                    .parse()
                    .map_err(|_| TrajectoryError::Format {
                        row,
                        message: format!("column {} is not a flag", HEADER[i]),
                    })
            };
            rows.push(TrajectoryRow {
                t: req(0)?,
                pi: Vec3::new(req(1)?, req(2)?, req(3)?),
                u: vec3(4)?,
                lambda_bar: vec3(7)?,
                q: [req(10)?, req(11)?, req(12)?, req(13)?],
                active: [flag(14)?, flag(15)?, flag(16)?],
            });
        }
        Ok(Self { rows })
    }

    pub fn read_csv_file(path: &Path) -> Result<Self, TrajectoryError> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}

/// Reads controls either from a trajectory CSV (its `u` columns) or from a
/// plain CSV of three torques per row, with or without a header line.
pub fn read_controls(path: &Path) -> Result<Vec<Vec3>, TrajectoryError> {
    let text = std::fs::read_to_string(path)?;
    if text.lines().next().is_some_and(|l| l.trim_start().starts_with("t,")) {
        return Ok(TrajectoryRecord::read_csv(text.as_bytes())?.controls());
    }
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (n, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let vals: Vec<Result<f64, _>> = rec.iter().map(|s| s.parse::<f64>()).collect();
        if n == 0 && vals.iter().any(|v| v.is_err()) {
            continue;
        }
        if vals.len() != 3 {
            return Err(TrajectoryError::Format {
                row: n + 1,
                message: format!("expected 3 torques, found {}", vals.len()),
            });
        }
        let parsed: Result<Vec<f64>, _> = vals.into_iter().collect();
        let v = parsed.map_err(|_| TrajectoryError::Format {
            row: n + 1,
            message: "torque is not a number".into(),
        })?;
        out.push(Vec3::new(v[0], v[1], v[2]));
    }
    Ok(out)
}
