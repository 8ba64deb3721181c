use crate::config::{ConfigError, ManeuverConfig};
use crate::svg::{stacked_chart, Panel, Series};
use crate::trajectory::{read_controls, TrajectoryError, TrajectoryRecord, TrajectoryRow};
use attitude_core::dynamics::{
    cosine_threshold, propagate, solve_relative_rotation, trace_operator, DynamicsError, DynamicsState,
};
use attitude_core::linalg::condition_number3;
use attitude_core::optimality::Bounds;
use attitude_core::shooting::{modified_shooting_solve, ModifiedSolution, ShootingVector, SolverReport};
use attitude_core::so3::log_map;
use attitude_core::{Rotation, Vec3};
use log::{info, warn};
use serde::Serialize;
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_IO: i32 = 4;

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const REPORT_FILE: &str = "report.json";
pub const PLOT_FILE: &str = "trajectory.svg";
pub const SIMULATION_FILE: &str = "simulation.csv";
pub const SIMULATION_REPORT_FILE: &str = "simulation.json";
pub const CHECK_FILE: &str = "check.json";

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("expected {expected} control rows, found {found}")]
    RowCountMismatch { expected: usize, found: usize },
    #[error("solver failed ({class}): {message}")]
    Solver { class: String, message: String },
    #[error("dynamics failure: {0}")]
    Dynamics(#[from] DynamicsError),
    #[error("trajectory file: {0}")]
    Trajectory(TrajectoryError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(ConfigError::Io { .. }) => EXIT_IO,
            CliError::Config(_) | CliError::RowCountMismatch { .. } => EXIT_VALIDATION,
            CliError::Trajectory(TrajectoryError::Io(_)) => EXIT_IO,
            CliError::Trajectory(_) => EXIT_VALIDATION,
            CliError::Solver { .. } | CliError::Dynamics(_) => EXIT_SOLVER,
            CliError::Io { .. } | CliError::Json(_) => EXIT_IO,
        }
    }
}

impl From<TrajectoryError> for CliError {
    fn from(e: TrajectoryError) -> Self {
        CliError::Trajectory(e)
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(io_err(path))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

/// Contents of the solver report file.
#[derive(Debug, Clone, Serialize)]
pub struct SolveSummary {
    pub status: &'static str,
    pub error_class: Option<String>,
    pub error: Option<String>,
    pub steps: usize,
    pub h: f64,
    #[serde(flatten)]
    pub solver: SolverReport,
    pub active_count: usize,
    /// Angle of `R_Nᵀ R_f` in radians.
    pub terminal_orientation_error: Option<f64>,
    pub terminal_momentum_error: Option<f64>,
    /// Largest `|u^i| − c^i` (non-positive when the torque bound holds).
    pub max_torque_excess: Option<f64>,
    /// Largest `|Π^i| − b^i` (non-positive when the momentum bound holds).
    pub max_momentum_excess: Option<f64>,
    /// `Σ_k (h/2)‖u_k‖²`.
    pub cost: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub solution: ModifiedSolution,
    pub trajectory: TrajectoryRecord,
    pub summary: SolveSummary,
}

fn final_rotation(trajectory: &TrajectoryRecord) -> Rotation {
    let q = trajectory.rows[trajectory.rows.len() - 1].q;
    attitude_core::UnitQuaternion::normalized(q).to_rotation()
}

fn summarize(config: &ManeuverConfig, solution: &ModifiedSolution, trajectory: &TrajectoryRecord) -> SolveSummary {
    let p = &config.problem;
    let r_n = final_rotation(trajectory);
    let orient = r_n.transpose().compose(&p.r_final).angle();
    let last = &trajectory.rows[trajectory.rows.len() - 1];
    let mom = (last.pi - p.pi_final).norm();
    let excess = |v: &Vec3, bound: &Vec3| (0..3).map(|i| v[i].abs() - bound[i]).fold(f64::NEG_INFINITY, f64::max);
    let controls = trajectory.controls();
    let torque = controls
        .iter()
        .map(|u| excess(u, &p.bounds.c))
        .fold(f64::NEG_INFINITY, f64::max);
    let momentum = trajectory
        .rows
        .iter()
        .map(|r| excess(&r.pi, &p.bounds.b))
        .fold(f64::NEG_INFINITY, f64::max);
    let cost = controls.iter().map(|u| 0.5 * p.h * u.norm_squared()).sum();
    SolveSummary {
        status: "converged",
        error_class: None,
        error: None,
        steps: p.steps,
        h: p.h,
        solver: solution.report.clone(),
        active_count: solution.active.len(),
        terminal_orientation_error: Some(orient),
        terminal_momentum_error: Some(mom),
        max_torque_excess: Some(torque),
        max_momentum_excess: Some(momentum),
        cost: Some(cost),
    }
}

type RowField = dyn Fn(&TrajectoryRow) -> Option<Vec3>;

/// Plots of control, momentum and scaled costate against time.
pub fn write_plots(record: &TrajectoryRecord, path: &Path, bounds: Option<&Bounds>) -> Result<(), CliError> {
    let t: Vec<f64> = record.rows.iter().map(|r| r.t).collect();
    let comp = |f: &RowField, i: usize| -> Vec<f64> {
        record
            .rows
            .iter()
            .map(|r| f(r).map(|v| v[i]).unwrap_or(f64::NAN))
            .collect()
    };
    let names = [["u1", "u2", "u3"], ["Pi1", "Pi2", "Pi3"], ["lam1", "lam2", "lam3"]];
    let getters: [&RowField; 3] = [&|r| r.u, &|r| Some(r.pi), &|r| r.lambda_bar];
    let guides = |v: Option<Vec3>| -> Vec<f64> {
        match v {
            Some(v) if v.iter().all(|x| (x - v[0]).abs() < 1e-12) => vec![v[0], -v[0]],
            _ => Vec::new(),
        }
    };
    let titles = ["Control torque u", "Body momentum Π", "Scaled costate λ̄"];
    let units = ["N·m", "N·m·s", "N·m"];
    let guide_vals = [
        guides(bounds.map(|b| b.c)),
        guides(bounds.map(|b| b.b)),
        guides(bounds.map(|b| b.c)),
    ];
    let panels: Vec<Panel> = (0..3)
        .map(|p| Panel {
            title: titles[p],
            y_label: units[p],
            series: (0..3)
                .map(|i| Series {
                    label: names[p][i],
                    values: comp(getters[p], i),
                })
                .collect(),
            guides: guide_vals[p].clone(),
        })
        .collect();
    write_text(path, &stacked_chart(&t, &panels))
}

fn output_dir(config: &ManeuverConfig, out_dir: Option<&Path>) -> PathBuf {
    out_dir
        .map(Path::to_path_buf)
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."))
}

/// Solves the configured maneuver and writes the trajectory CSV, the report
/// JSON and the SVG plots. On solver failure the report is still written,
/// carrying the error class.
pub fn run_solve(config: &ManeuverConfig, out_dir: Option<&Path>) -> Result<SolveOutcome, CliError> {
    let dir = output_dir(config, out_dir);
    ensure_dir(&dir)?;
    let p = &config.problem;
    let x0 = ShootingVector::initial_guess(p);
    info!("solving {} steps with h = {}", p.steps, p.h);
    match modified_shooting_solve(&x0, p, &config.solver) {
        Ok(solution) => {
            let trajectory = TrajectoryRecord::from_solution(&solution.x, &solution.active, p)?;
            let summary = summarize(config, &solution, &trajectory);
            let csv_path = dir.join(TRAJECTORY_FILE);
            trajectory.write_csv_file(&csv_path)?;
            write_json(&dir.join(REPORT_FILE), &summary)?;
            write_plots(&trajectory, &dir.join(PLOT_FILE), Some(&p.bounds))?;
            info!(
                "converged in {} iterations; terminal orientation error {:e} rad",
                summary.solver.iterations,
                summary.terminal_orientation_error.unwrap_or(f64::NAN)
            );
            Ok(SolveOutcome {
                solution,
                trajectory,
                summary,
            })
        }
        Err(failure) => {
            warn!("solver failed: {}", failure.error);
            let summary = SolveSummary {
                status: "failed",
                error_class: Some(failure.error.class().to_string()),
                error: Some(failure.error.to_string()),
                steps: p.steps,
                h: p.h,
                solver: failure.report.clone(),
                active_count: 0,
                terminal_orientation_error: None,
                terminal_momentum_error: None,
                max_torque_excess: None,
                max_momentum_excess: None,
                cost: None,
            };
            write_json(&dir.join(REPORT_FILE), &summary)?;
            Err(CliError::Solver {
                class: failure.error.class().to_string(),
                message: failure.error.to_string(),
            })
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulationSummary {
    pub steps: usize,
    pub final_pi: [f64; 3],
    pub final_quaternion: [f64; 4],
    /// Angle of `R_Nᵀ R_f` in radians.
    pub orientation_error_to_target: f64,
    pub momentum_error_to_target: f64,
    /// `max_k ‖R_k Π_k − R_0 Π_0‖`.
    pub spatial_momentum_drift: f64,
}

#[derive(Debug, Clone)]
pub struct SimulationOutcome {
    pub trajectory: TrajectoryRecord,
    pub states: Vec<DynamicsState>,
    pub summary: SimulationSummary,
}

/// Forward-propagates the controls in `controls_path` from the configured
/// initial state and writes the resulting trajectory.
pub fn run_simulate(
    config: &ManeuverConfig,
    controls_path: &Path,
    out_dir: Option<&Path>,
) -> Result<SimulationOutcome, CliError> {
    let p = &config.problem;
    let controls = read_controls(controls_path)?;
    if controls.len() != p.steps {
        return Err(CliError::RowCountMismatch {
            expected: p.steps,
            found: controls.len(),
        });
    }
    let outcome = simulate(config, &controls)?;
    let dir = output_dir(config, out_dir);
    ensure_dir(&dir)?;
    outcome.trajectory.write_csv_file(&dir.join(SIMULATION_FILE))?;
    write_json(&dir.join(SIMULATION_REPORT_FILE), &outcome.summary)?;
    Ok(outcome)
}

/// In-memory forward simulation without file output.
pub fn simulate(config: &ManeuverConfig, controls: &[Vec3]) -> Result<SimulationOutcome, CliError> {
    let p = &config.problem;
    let init = DynamicsState {
        r: p.r_initial,
        pi: p.pi_initial,
    };
    let states = propagate(&init, controls, p.h, &p.inertia)?;
    let pairs: Vec<(Rotation, Vec3)> = states.iter().map(|s| (s.r, s.pi)).collect();
    let trajectory = TrajectoryRecord::from_states(&pairs, controls, p.h);
    let last = states[states.len() - 1];
    let m0 = init.r.apply(&init.pi);
    let drift = states
        .iter()
        .map(|s| (s.r.apply(&s.pi) - m0).norm())
        .fold(0.0, f64::max);
    let summary = SimulationSummary {
        steps: controls.len(),
        final_pi: [last.pi.x, last.pi.y, last.pi.z],
        final_quaternion: last.r.to_quaternion().as_array(),
        orientation_error_to_target: last.r.transpose().compose(&p.r_final).angle(),
        momentum_error_to_target: (last.pi - p.pi_final).norm(),
        spatial_momentum_drift: drift,
    };
    Ok(SimulationOutcome {
        trajectory,
        states,
        summary,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub jd: [f64; 3],
    pub cosine_threshold: f64,
    /// Worst condition number of the trace operator along a zero-control
    /// propagation from the initial state.
    pub worst_trace_condition: f64,
    pub worst_trace_condition_step: usize,
    /// Largest `‖hΠ_k‖` along the same propagation.
    pub max_h_pi: f64,
    /// Largest relative rotation angle `‖log F_k‖` (radians).
    pub max_relative_rotation_angle: f64,
    /// `true` when some relative rotation exceeds 90% of π/2.
    pub near_quarter_turn: bool,
    /// `true` when `cos(‖log F_k‖/2)` falls below the threshold at some step.
    pub cosine_condition_met_somewhere: bool,
}

/// Static diagnostics of the configured maneuver.
pub fn run_check(config: &ManeuverConfig, out_dir: Option<&Path>) -> Result<CheckReport, CliError> {
    let p = &config.problem;
    let init = DynamicsState {
        r: p.r_initial,
        pi: p.pi_initial,
    };
    let states = propagate(&init, &vec![Vec3::zeros(); p.steps], p.h, &p.inertia)?;
    let threshold = cosine_threshold(&p.inertia);
    let mut worst = (0.0f64, 0usize);
    let mut max_h_pi = 0.0f64;
    let mut max_angle = 0.0f64;
    let mut cosine_met = false;
    for (k, s) in states.iter().enumerate() {
        let sol = solve_relative_rotation(&s.pi, p.h, &p.inertia)?;
        let cond = condition_number3(&trace_operator(&sol.f, &p.inertia));
        if cond > worst.0 {
            worst = (cond, k);
        }
        max_h_pi = max_h_pi.max((s.pi * p.h).norm());
        let angle = log_map(&sol.f).map(|v| v.norm()).unwrap_or(std::f64::consts::PI);
        max_angle = max_angle.max(angle);
        cosine_met |= (0.5 * angle).cos() < threshold;
    }
    let jd = p.inertia.jd_diagonal();
    let report = CheckReport {
        jd: [jd.x, jd.y, jd.z],
        cosine_threshold: threshold,
        worst_trace_condition: worst.0,
        worst_trace_condition_step: worst.1,
        max_h_pi,
        max_relative_rotation_angle: max_angle,
        near_quarter_turn: max_angle > 0.9 * std::f64::consts::FRAC_PI_2,
        cosine_condition_met_somewhere: cosine_met,
    };
    if let Some(dir) = out_dir.map(Path::to_path_buf).or_else(|| config.output_dir.clone()) {
        ensure_dir(&dir)?;
        write_json(&dir.join(CHECK_FILE), &report)?;
    }
    Ok(report)
}

/// Renders the plots of an exported trajectory CSV.
pub fn run_plot(trajectory_path: &Path, out_dir: Option<&Path>) -> Result<PathBuf, CliError> {
    let record = TrajectoryRecord::read_csv_file(trajectory_path)?;
    let dir = out_dir
        .map(Path::to_path_buf)
        .or_else(|| trajectory_path.parent().map(Path::to_path_buf))
        .unwrap_or_else(|| PathBuf::from("."));
    ensure_dir(&dir)?;
    let stem = trajectory_path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("trajectory");
    let path = dir.join(format!("{stem}.svg"));
    write_plots(&record, &path, None)?;
    Ok(path)
}
