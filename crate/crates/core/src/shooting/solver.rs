use super::active::{
    enforce_active_constraints, identify_active_set, project_feasible, update_costates_after_projection, ActiveSet,
    BoundSide,
};
use super::assembly::residual_and_jacobian;
use super::staircase::solve_staircase;
use super::{ShootingError, ShootingVector};
use crate::linalg::solve_dense;
use crate::problem::ManeuverProblem;
use log::{debug, info};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::time::Instant;

/// Consecutive two-cycles of the active set tolerated before giving up.
pub const CYCLE_LIMIT: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LinearSolverKind {
    #[default]
    Dense,
    /// Block elimination along the time steps. Used only while no momentum
    /// bound is active; otherwise the dense path is taken.
    Staircase,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub damping: f64,
    pub linear_solver: LinearSolverKind,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 200,
            damping: 1.0,
            linear_solver: LinearSolverKind::Dense,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverReport {
    /// Newton steps taken.
    pub iterations: usize,
    /// `‖M̃‖_∞` at every evaluated iterate, starting with the initial one.
    pub residual_history: Vec<f64>,
    /// Active `(step, axis, side)` triples at every evaluated iterate.
    pub active_set_history: Vec<Vec<(usize, usize, BoundSide)>>,
    pub converged: bool,
    pub final_residual_inf: f64,
    /// Seconds.
    pub wall_time: f64,
}

impl SolverReport {
    fn new() -> Self {
        Self {
            iterations: 0,
            residual_history: Vec::new(),
            active_set_history: Vec::new(),
            converged: false,
            final_residual_inf: f64::INFINITY,
            wall_time: 0.0,
        }
    }
}

/// A failed solve together with everything recorded up to the failure.
#[derive(Debug, Clone)]
pub struct SolveFailure {
    pub error: ShootingError,
    pub report: SolverReport,
    pub last_iterate: ShootingVector,
}

impl std::fmt::Display for SolveFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.error.fmt(f)
    }
}

impl std::error::Error for SolveFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

#[derive(Debug, Clone)]
pub struct ModifiedSolution {
    pub x: ShootingVector,
    pub active: ActiveSet,
    pub report: SolverReport,
}

fn fail(error: ShootingError, mut report: SolverReport, x: &ShootingVector, start: Instant) -> SolveFailure {
    report.wall_time = start.elapsed().as_secs_f64();
    SolveFailure {
        error,
        report,
        last_iterate: x.clone(),
    }
}

fn newton_direction(
    jac: DMatrix<f64>,
    residual: &DVector<f64>,
    problem: &ManeuverProblem,
    kind: LinearSolverKind,
    active_empty: bool,
) -> Option<DVector<f64>> {
    let rhs = -residual;
    match kind {
        LinearSolverKind::Staircase if active_empty => solve_staircase(&jac, &rhs, problem.steps).or_else(|| {
            debug!("staircase elimination failed; falling back to dense factorization");
            solve_dense(jac, &rhs)
        }),
        _ => solve_dense(jac, &rhs),
    }
}

/// Plain multiple-shooting Newton iteration on `M(X) = 0`.
pub fn newton_solve(
    x0: &ShootingVector,
    problem: &ManeuverProblem,
    options: &SolverOptions,
) -> Result<(ShootingVector, SolverReport), SolveFailure> {
    let start = Instant::now();
    let mut report = SolverReport::new();
    let mut x = x0.clone();
    loop {
        let (r, jac) = match residual_and_jacobian(&x, problem) {
            Ok(v) => v,
            Err(e) => return Err(fail(e, report, &x, start)),
        };
        let norm = r.amax();
        report.residual_history.push(norm);
        report.active_set_history.push(Vec::new());
        report.final_residual_inf = norm;
        debug!("newton iteration {}: residual {:e}", report.iterations, norm);
        if !norm.is_finite() {
            let iteration = report.iterations;
            return Err(fail(ShootingError::NonFinite { iteration }, report, &x, start));
        }
        if norm < options.tol {
            report.converged = true;
            report.wall_time = start.elapsed().as_secs_f64();
            info!("newton converged in {} iterations", report.iterations);
            return Ok((x, report));
        }
        if report.iterations >= options.max_iter {
            let err = ShootingError::MaxIterationsExceeded {
                iterations: report.iterations,
                residual: norm,
            };
            return Err(fail(err, report, &x, start));
        }
        let Some(dx) = newton_direction(jac, &r, problem, options.linear_solver, true) else {
            let iteration = report.iterations;
            return Err(fail(ShootingError::SingularJacobian { iteration }, report, &x, start));
        };
        x = x.step(&dx, options.damping);
        report.iterations += 1;
    }
}

/// Projection / active-set Newton iteration. Each pass projects the momenta
/// onto the bounds, repairs the costates the projection invalidated,
/// identifies active bounds, replaces their costate rows by bound equations
/// and either stops or takes a Newton step on the modified system.
pub fn modified_shooting_solve(
    x0: &ShootingVector,
    problem: &ManeuverProblem,
    options: &SolverOptions,
) -> Result<ModifiedSolution, SolveFailure> {
    let start = Instant::now();
    let mut report = SolverReport::new();
    let mut x = x0.clone();
    let mut cycles = 0;
    loop {
        let projected = project_feasible(&x, &problem.bounds);
        let mut xp = match update_costates_after_projection(&projected, &x, problem) {
            Ok(v) => v,
            Err(e) => return Err(fail(e, report, &x, start)),
        };
        let mut active = match identify_active_set(&xp, problem) {
            Ok(a) => a,
            Err(e) => return Err(fail(e, report, &xp, start)),
        };
        for e in active.entries.iter_mut() {
            let snapped = e.side.sign() * e.bound;
            let mut pi = xp.pi(e.step);
            pi[e.axis] = snapped;
            xp.set_pi(e.step, &pi);
            e.momentum = snapped;
        }
        let (r, jac) = match residual_and_jacobian(&xp, problem) {
            Ok(v) => v,
            Err(e) => return Err(fail(e, report, &xp, start)),
        };
        let (r, jac) = if active.is_empty() {
            (r, jac)
        } else {
            enforce_active_constraints(&active, r, jac)
        };
        let norm = r.amax();
        report.residual_history.push(norm);
        report.final_residual_inf = norm;
        let sig = active.signature();
        let hist = &report.active_set_history;
        if hist.len() >= 2 && hist[hist.len() - 2] == sig && hist[hist.len() - 1] != sig {
            cycles += 1;
        } else {
            cycles = 0;
        }
        report.active_set_history.push(sig);
        debug!(
            "modified iteration {}: residual {:e}, {} active",
            report.iterations,
            norm,
            active.len()
        );
        if !norm.is_finite() {
            let iteration = report.iterations;
            return Err(fail(ShootingError::NonFinite { iteration }, report, &xp, start));
        }
        if norm < options.tol {
            report.converged = true;
            report.wall_time = start.elapsed().as_secs_f64();
            info!(
                "modified solver converged in {} iterations with {} active bounds",
                report.iterations,
                active.len()
            );
            return Ok(ModifiedSolution { x: xp, active, report });
        }
        if cycles >= CYCLE_LIMIT {
            return Err(fail(ShootingError::ActiveSetCycling { cycles }, report, &xp, start));
        }
        if report.iterations >= options.max_iter {
            let err = ShootingError::MaxIterationsExceeded {
                iterations: report.iterations,
                residual: norm,
            };
            return Err(fail(err, report, &xp, start));
        }
        let Some(dx) = newton_direction(jac, &r, problem, options.linear_solver, active.is_empty()) else {
            let iteration = report.iterations;
            return Err(fail(ShootingError::SingularJacobian { iteration }, report, &xp, start));
        };
        x = xp.step(&dx, options.damping);
        report.iterations += 1;
    }
}

/// Least-squares fit of `log r_{n+1} = s log r_n + log K` over the tail of
/// one or more residual histories.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailFit {
    pub slope: f64,
    /// `K` from the fitted intercept.
    pub k_fit: f64,
    /// Smallest `K` with `r_{n+1} ≤ K r_n²` on every pair used.
    pub k_bound: f64,
    pub pairs: usize,
}

/// Uses pairs with `floor < r_n < upper` and `r_{n+1} > floor`; values at or
/// below `floor` are rounding noise rather than Newton contraction.
pub fn quadratic_tail_fit(histories: &[&[f64]], upper: f64, floor: f64) -> Option<TailFit> {
    let mut pts = Vec::new();
    for h in histories {
        for w in h.windows(2) {
            if w[0] < upper && w[0] > floor && w[1] > floor {
                pts.push((w[0], w[1]));
            }
        }
    }
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let xs: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let k_fit = (my - slope * mx).exp();
    let k_bound = pts.iter().map(|(a, b)| b / (a * a)).fold(0.0, f64::max);
    Some(TailFit {
        slope,
        k_fit,
        k_bound,
        pairs: pts.len(),
    })
}
