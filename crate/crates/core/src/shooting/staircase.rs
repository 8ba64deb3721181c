//! Block elimination along the time steps for the Newton system.
//!
//! Row block `k` (the `Σ_{k+1}`, `Ξ_{k+1}` rows) involves `z_0..z_{k+1}` and
//! `μ̄_0`, where `z_m = (Π_m, λ̄_m)`, and its diagonal block on `z_{k+1}` is
//! `[[I, 0], [·, M_{k+1}]]`. Every `z_m` is therefore affine in the nine
//! unknowns `s = (z_0, μ̄_0)`, which the nine boundary rows then fix.

use crate::linalg::{solve_dense, solve_fixed};
use nalgebra::{DMatrix, DVector, SMatrix, SVector};

type Block6 = SMatrix<f64, 6, 6>;
type Affine = SMatrix<f64, 6, 9>;

/// Solves `jac · x = rhs` for a Jacobian with no active-bound rows.
/// Returns `None` if a diagonal block or the final 9×9 system is singular.
pub fn solve_staircase(jac: &DMatrix<f64>, rhs: &DVector<f64>, steps: usize) -> Option<DVector<f64>> {
    let dim = 6 * steps + 9;
    if jac.nrows() != dim || jac.ncols() != dim || rhs.len() != dim {
        return None;
    }
    let mu_col = 6 * (steps + 1);
    let mut e_mu = SMatrix::<f64, 3, 9>::zeros();
    e_mu.fixed_view_mut::<3, 3>(0, 6).fill_with_identity();
    let mut a_mats: Vec<Affine> = Vec::with_capacity(steps + 1);
    let mut a_vecs: Vec<SVector<f64, 6>> = Vec::with_capacity(steps + 1);
    let mut a0 = Affine::zeros();
    a0.fixed_view_mut::<6, 6>(0, 0).fill_with_identity();
    a_mats.push(a0);
    a_vecs.push(SVector::zeros());

    for k in 0..steps {
        let rows = 6 * k;
        let h: Block6 = jac.fixed_view::<6, 6>(rows, 6 * (k + 1)).into_owned();
        let mut acc_m: Affine = jac.fixed_view::<6, 3>(rows, mu_col).into_owned() * e_mu;
        let mut acc_v: SVector<f64, 6> = rhs.fixed_rows::<6>(rows).into_owned();
        for m in 0..=k {
            let blk = jac.fixed_view::<6, 6>(rows, 6 * m);
            if blk.iter().all(|v| *v == 0.0) {
                continue;
            }
            acc_m += blk * a_mats[m];
            acc_v -= blk * a_vecs[m];
        }
        let mut stacked = SMatrix::<f64, 6, 10>::zeros();
        stacked.fixed_view_mut::<6, 9>(0, 0).copy_from(&(-acc_m));
        stacked.fixed_view_mut::<6, 1>(0, 9).copy_from(&acc_v);
        let sol = solve_fixed(&h, &stacked)?;
        a_mats.push(sol.fixed_view::<6, 9>(0, 0).into_owned());
        a_vecs.push(sol.fixed_view::<6, 1>(0, 9).into_owned());
    }

    let rows = 6 * steps;
    let mut g = DMatrix::<f64>::zeros(9, 9);
    let mut b = DVector::<f64>::from_iterator(9, rhs.rows(rows, 9).iter().copied());
    for m in 0..=steps {
        let blk = jac.fixed_view::<9, 6>(rows, 6 * m);
        if blk.iter().all(|v| *v == 0.0) {
            continue;
        }
        let gm: SMatrix<f64, 9, 9> = blk * a_mats[m];
        g += DMatrix::from_column_slice(9, 9, gm.as_slice());
        let bm: SVector<f64, 9> = blk * a_vecs[m];
        b -= DVector::from_column_slice(bm.as_slice());
    }
    let gmu: SMatrix<f64, 9, 9> = jac.fixed_view::<9, 3>(rows, mu_col).into_owned() * e_mu;
    g += DMatrix::from_column_slice(9, 9, gmu.as_slice());
    let s = solve_dense(g, &b)?;
    let s9 = SVector::<f64, 9>::from_column_slice(s.as_slice());

    let mut x = DVector::zeros(dim);
    for m in 0..=steps {
        let z = a_mats[m] * s9 + a_vecs[m];
        x.fixed_rows_mut::<6>(6 * m).copy_from(&z);
    }
    x.fixed_rows_mut::<3>(mu_col).copy_from(&s9.fixed_rows::<3>(6));
    Some(x)
}
