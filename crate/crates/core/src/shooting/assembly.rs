use super::{ShootingError, ShootingVector};
use crate::dynamics::{quaternion_sensitivity, rotation_sensitivity, sensitivity_matrices, solve_relative_rotation};
use crate::optimality::{
    control_generalized_gradient, momentum_boundary_residual, sigma_residual_with, terminal_mismatch, xi_residual_with,
};
use crate::problem::ManeuverProblem;
use crate::so3::{hat, log_map, right_jacobian_inv, skew_vee, Mat3, Rotation, Vec3};
use nalgebra::{DMatrix, DVector};

/// Per-step quantities shared by the residual and Jacobian rows.
///
/// Indices run over `k = 0..=N`; `F_N` is needed by the last costate row.
#[derive(Debug, Clone)]
pub struct StepGeometry {
    pub f: Vec<Rotation>,
    /// `N_k = T_k⁻ᵀ F_k`; entry 0 is unused and left at zero.
    pub n: Vec<Mat3>,
    /// `Q_k = F_1 ⋯ F_k`, with `Q_0 = I`.
    pub q: Vec<Rotation>,
    /// `∂F_k/∂Π_k^i`, present when built with derivatives.
    pub df: Vec<[Mat3; 3]>,
    /// Orientation constraint value.
    pub c_ornt: Vec3,
}

impl StepGeometry {
    pub fn build(x: &ShootingVector, problem: &ManeuverProblem, derivatives: bool) -> Result<Self, ShootingError> {
        let steps = x.steps();
        let h = problem.h;
        let inertia = &problem.inertia;
        let mut f = Vec::with_capacity(steps + 1);
        let mut n = Vec::with_capacity(steps + 1);
        let mut df = Vec::with_capacity(if derivatives { steps + 1 } else { 0 });
        for k in 0..=steps {
            let fail = |source| ShootingError::DynamicsFailure { step: k, source };
            let sol = solve_relative_rotation(&x.pi(k), h, inertia).map_err(fail)?;
            if k == 0 {
                n.push(Mat3::zeros());
            } else {
                n.push(sensitivity_matrices(&sol.f, inertia, h).map_err(fail)?.1);
            }
            if derivatives {
                let dq = quaternion_sensitivity(&sol, h, inertia).map_err(fail)?;
                df.push(rotation_sensitivity(&sol, &dq));
            }
            f.push(sol.f);
        }
        let mut q = Vec::with_capacity(steps + 1);
        q.push(Rotation::identity());
        for k in 1..=steps {
            let next = q[k - 1].compose(&f[k]);
            q.push(next);
        }
        let mismatch = terminal_mismatch(&problem.r_initial, &problem.r_final, &f[..steps]);
        let c_ornt = log_map(&mismatch).map_err(|e| ShootingError::Orientation(e.into()))?;
        Ok(Self { f, n, q, df, c_ornt })
    }
}

fn check_len(x: &ShootingVector, problem: &ManeuverProblem) -> Result<(), ShootingError> {
    let expected = ShootingVector::len_for(problem.steps);
    if x.steps() != problem.steps || x.len() != expected {
        return Err(ShootingError::DimensionMismatch { expected, got: x.len() });
    }
    Ok(())
}

pub(crate) fn matching_from_geometry(
    x: &ShootingVector,
    problem: &ManeuverProblem,
    geo: &StepGeometry,
) -> DVector<f64> {
    let steps = x.steps();
    let h = problem.h;
    let mu = x.mu_bar0();
    let mut r = DVector::zeros(x.len());
    for k in 0..steps {
        let (pi_k, pi_k1) = (x.pi(k), x.pi(k + 1));
        let (lam_k, lam_k1) = (x.lambda_bar(k), x.lambda_bar(k + 1));
        let sigma = sigma_residual_with(&geo.f[k], &pi_k, &pi_k1, &lam_k, h, &problem.bounds);
        let xi = xi_residual_with(
            &geo.f[k + 1],
            &geo.n[k + 1],
            &pi_k1,
            &lam_k,
            &lam_k1,
            &mu,
            &geo.q[k + 1],
            &Vec3::zeros(),
            h,
        );
        r.fixed_rows_mut::<3>(6 * k).copy_from(&sigma);
        r.fixed_rows_mut::<3>(6 * k + 3).copy_from(&xi);
    }
    let bnd = momentum_boundary_residual(&x.pi(0), &x.pi(steps), &problem.pi_initial, &problem.pi_final);
    r.fixed_rows_mut::<6>(6 * steps).copy_from(&bnd);
    r.fixed_rows_mut::<3>(6 * steps + 6).copy_from(&geo.c_ornt);
    r
}

/// Stacked matching conditions `M(X)` with `β = 0`.
pub fn assemble_matching(x: &ShootingVector, problem: &ManeuverProblem) -> Result<DVector<f64>, ShootingError> {
    check_len(x, problem)?;
    let geo = StepGeometry::build(x, problem, false)?;
    Ok(matching_from_geometry(x, problem, &geo))
}

fn set_block(m: &mut DMatrix<f64>, r: usize, c: usize, b: &Mat3) {
    m.fixed_view_mut::<3, 3>(r, c).copy_from(b);
}

fn add_block(m: &mut DMatrix<f64>, r: usize, c: usize, b: &Mat3) {
    let mut v = m.fixed_view_mut::<3, 3>(r, c);
    v += b;
}

pub(crate) fn jacobian_from_geometry(
    x: &ShootingVector,
    problem: &ManeuverProblem,
    geo: &StepGeometry,
) -> DMatrix<f64> {
    let steps = x.steps();
    let dim = x.len();
    let h = problem.h;
    let jd = problem.inertia.jd_matrix();
    let mu = x.mu_bar0();
    let mu_col = ShootingVector::mu_offset(steps);
    let eye = Mat3::identity();
    let mut jac = DMatrix::zeros(dim, dim);

    // V_m = [v_m^1 v_m^2 v_m^3] with v_m^i = Q_m (∂F_m/∂Π_m^i)ᵀ Q_{m−1}ᵀ μ̄_0, so that
    // ∂(Q_jᵀ μ̄_0)/∂Π_m = Q_jᵀ V_m for every m ≤ j.
    let mut v = vec![Mat3::zeros(); steps + 1];
    for m in 1..=steps {
        let qmu = geo.q[m - 1].matrix().transpose() * mu;
        let cols: [Vec3; 3] = std::array::from_fn(|i| geo.q[m].matrix() * (geo.df[m][i].transpose() * qmu));
        v[m] = Mat3::from_columns(&cols);
    }

    for k in 0..steps {
        let j = k + 1;
        let row_s = 6 * k;
        let row_x = 6 * k + 3;
        let pi_k = x.pi(k);
        let fk = geo.f[k].matrix();

        set_block(&mut jac, row_s, ShootingVector::pi_offset(j), &eye);
        let cols: [Vec3; 3] = std::array::from_fn(|i| -(geo.df[k][i].transpose() * pi_k + fk.transpose().column(i)));
        set_block(
            &mut jac,
            row_s,
            ShootingVector::pi_offset(k),
            &Mat3::from_columns(&cols),
        );
        let d = control_generalized_gradient(&x.lambda_bar(k), &problem.bounds);
        set_block(&mut jac, row_s, ShootingVector::lambda_offset(k), &(-d * h));

        let fj = geo.f[j].matrix();
        let nj = geo.n[j];
        let pi_j = x.pi(j);
        let lam_j = x.lambda_bar(j);
        let qt_mu = geo.q[j].matrix().transpose() * mu;
        let m_j = fj - nj * hat(&(fj.transpose() * pi_j)) * h;
        let nq = nj * geo.q[j].matrix().transpose();
        set_block(&mut jac, row_x, ShootingVector::lambda_offset(k), &(-eye));
        set_block(&mut jac, row_x, ShootingVector::lambda_offset(j), &m_j);
        set_block(&mut jac, row_x, mu_col, &nq);

        let t_inv_t = nj * fj.transpose();
        let own: [Vec3; 3] = std::array::from_fn(|i| {
            let dfi = geo.df[j][i];
            let dfjd = dfi * jd;
            let dt = eye * dfjd.trace() - dfjd;
            let dn = t_inv_t * (dfi - dt.transpose() * nj);
            let dm = dfi
                - (dn * hat(&(fj.transpose() * pi_j)) + nj * hat(&(dfi.transpose() * pi_j + fj.transpose().column(i))))
                    * h;
            dn * qt_mu + dm * lam_j
        });
        add_block(&mut jac, row_x, ShootingVector::pi_offset(j), &Mat3::from_columns(&own));
        for (m, vm) in v.iter().enumerate().take(j + 1).skip(1) {
            add_block(&mut jac, row_x, ShootingVector::pi_offset(m), &(nq * vm));
        }
    }

    set_block(&mut jac, 6 * steps, ShootingVector::pi_offset(steps), &eye);
    set_block(&mut jac, 6 * steps + 3, ShootingVector::pi_offset(0), &eye);

    let jr = right_jacobian_inv(&geo.c_ornt);
    let mut trailing_t = Mat3::identity();
    for k in (0..steps).rev() {
        let fk_t = geo.f[k].matrix().transpose();
        let w: [Vec3; 3] = std::array::from_fn(|i| skew_vee(&(fk_t * geo.df[k][i])));
        let block = jr * trailing_t * Mat3::from_columns(&w);
        set_block(&mut jac, 6 * steps + 6, ShootingVector::pi_offset(k), &block);
        trailing_t *= fk_t;
    }
    jac
}

/// Analytic Jacobian of [`assemble_matching`], using the generalized
/// gradient of the clamp law.
pub fn assemble_jacobian(x: &ShootingVector, problem: &ManeuverProblem) -> Result<DMatrix<f64>, ShootingError> {
    check_len(x, problem)?;
    let geo = StepGeometry::build(x, problem, true)?;
    Ok(jacobian_from_geometry(x, problem, &geo))
}

/// Residual and Jacobian from a single geometry pass.
pub(crate) fn residual_and_jacobian(
    x: &ShootingVector,
    problem: &ManeuverProblem,
) -> Result<(DVector<f64>, DMatrix<f64>), ShootingError> {
    check_len(x, problem)?;
    let geo = StepGeometry::build(x, problem, true)?;
    Ok((
        matching_from_geometry(x, problem, &geo),
        jacobian_from_geometry(x, problem, &geo),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{advance, DynamicsState, InertiaModel};
    use crate::optimality::{optimal_control, Bounds};
    use crate::so3::exp_rodrigues;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn problem(steps: usize) -> ManeuverProblem {
        ManeuverProblem {
            inertia: InertiaModel::new(800.0, 1200.0, 1000.0).unwrap(),
            r_initial: Rotation::identity(),
            r_final: exp_rodrigues(&(Vec3::new(1.0, 1.0, 1.0).normalize() * std::f64::consts::FRAC_PI_2)),
            pi_initial: Vec3::new(30.0, -10.0, 10.0),
            pi_final: Vec3::zeros(),
            bounds: Bounds::new(Vec3::repeat(20.0), Vec3::repeat(70.0)).unwrap(),
            steps,
            h: 0.1,
        }
    }

    fn rand_vec(rng: &mut ChaCha8Rng, scale: f64) -> Vec3 {
        Vec3::new(
            rng.random_range(-scale..scale),
            rng.random_range(-scale..scale),
            rng.random_range(-scale..scale),
        )
    }

    #[test]
    fn trivial_problem_has_zero_residual() {
        let mut p = problem(1);
        p.r_final = p.r_initial;
        p.pi_initial = Vec3::zeros();
        let x = ShootingVector::zeros(1);
        assert_eq!(assemble_matching(&x, &p).unwrap().amax(), 0.0);
    }

    #[test]
    fn consistent_forward_propagation_has_small_residual() {
        // Forward-propagate the costate recursion together with the dynamics, then
        // pick the boundary data the trajectory actually reaches.
        let mut p = problem(12);
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let h = p.h;
        let mut x = ShootingVector::zeros(p.steps);
        let mu = rand_vec(&mut rng, 200.0);
        x.set_mu_bar0(&mu);
        let mut state = DynamicsState {
            r: p.r_initial,
            pi: p.pi_initial,
        };
        let mut lam = rand_vec(&mut rng, 15.0);
        let mut q = Rotation::identity();
        x.set_pi(0, &state.pi);
        for k in 0..p.steps {
            x.set_lambda_bar(k, &lam);
            let sol = solve_relative_rotation(&state.pi, h, &p.inertia).unwrap();
            state = advance(&state, &sol, &optimal_control(&lam, &p.bounds), h);
            x.set_pi(k + 1, &state.pi);
            // solve Ξ_{k+1} = 0 for λ̄_{k+1}
            let next = solve_relative_rotation(&state.pi, h, &p.inertia).unwrap();
            let (_, n) = sensitivity_matrices(&next.f, &p.inertia, h).unwrap();
            q = q.compose(&next.f);
            let m = next.f.matrix() - n * hat(&(next.f.matrix().transpose() * state.pi)) * h;
            lam = m.try_inverse().unwrap() * (lam - n * q.matrix().transpose() * mu);
        }
        x.set_lambda_bar(p.steps, &lam);
        p.pi_final = state.pi;
        p.r_final = state.r;
        let r = assemble_matching(&x, &p).unwrap();
        assert!(r.amax() <= 1e-10, "{}", r.amax());
    }

    #[test]
    fn boundary_rows_are_linear() {
        let p = problem(5);
        let x = ShootingVector::initial_guess(&p);
        let r0 = assemble_matching(&x, &p).unwrap();
        let mut y = x.clone();
        y.set_pi(5, &(x.pi(5) + Vec3::new(0.0, 0.25, 0.0)));
        let r1 = assemble_matching(&y, &p).unwrap();
        assert_eq!(r1[6 * 5 + 1] - r0[6 * 5 + 1], 0.25);
    }

    fn random_x(rng: &mut ChaCha8Rng, p: &ManeuverProblem) -> ShootingVector {
        let mut x = ShootingVector::zeros(p.steps);
        for k in 0..=p.steps {
            x.set_pi(k, &rand_vec(rng, 60.0));
            let mut lam = rand_vec(rng, 30.0);
            // stay away from the clamp kinks
            for i in 0..3 {
                if (lam[i].abs() - p.bounds.c[i]).abs() < 1e-3 {
                    lam[i] += 0.01;
                }
            }
            x.set_lambda_bar(k, &lam);
        }
        x.set_mu_bar0(&rand_vec(rng, 300.0));
        x
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let p = problem(6);
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        for _ in 0..3 {
            let x = random_x(&mut rng, &p);
            let jac = assemble_jacobian(&x, &p).unwrap();
            for c in 0..x.len() {
                let mut e = DVector::zeros(x.len());
                e[c] = 1e-6;
                let plus = ShootingVector::from_vector(p.steps, x.as_vector() + &e).unwrap();
                let minus = ShootingVector::from_vector(p.steps, x.as_vector() - &e).unwrap();
                let fd = (assemble_matching(&plus, &p).unwrap() - assemble_matching(&minus, &p).unwrap()) / 2e-6;
                let col = jac.column(c);
                let scale = col.amax().max(1e-3);
                let err = (fd - col).amax();
                assert!(err <= 1e-5 * scale, "column {c}: {}", err / scale);
            }
        }
    }

    #[test]
    fn sigma_blocks_are_exact() {
        let p = problem(4);
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let x = random_x(&mut rng, &p);
        let jac = assemble_jacobian(&x, &p).unwrap();
        for k in 0..p.steps {
            let blk = jac.fixed_view::<3, 3>(6 * k, 6 * (k + 1)).into_owned();
            assert_eq!(blk, Mat3::identity());
            let d = control_generalized_gradient(&x.lambda_bar(k), &p.bounds);
            assert_eq!(jac.fixed_view::<3, 3>(6 * k, 6 * k + 3).into_owned(), -d * p.h);
        }
    }
}
