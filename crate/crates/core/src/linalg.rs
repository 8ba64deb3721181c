//! Small dense linear-algebra helpers shared by the dynamics and the solver.

use nalgebra::{Const, DMatrix, DVector, Dim, DimMin, Matrix, RawStorage, SMatrix, SVector};

/// Relative pivot magnitude below which a factorization is declared rank deficient.
pub const PIVOT_RTOL: f64 = 1e-14;

/// Solves `a x = b` with a partially pivoted LU. Returns `None` when the smallest
/// pivot is below `PIVOT_RTOL` times the largest.
pub fn solve_fixed<const N: usize, const M: usize>(
    a: &SMatrix<f64, N, N>,
    b: &SMatrix<f64, N, M>,
) -> Option<SMatrix<f64, N, M>>
where
    Const<N>: DimMin<Const<N>, Output = Const<N>>,
{
    let lu = a.lu();
    let u = lu.u();
    if pivot_ratio(&u) < PIVOT_RTOL {
        return None;
    }
    lu.solve(b)
}

pub fn solve_vec<const N: usize>(a: &SMatrix<f64, N, N>, b: &SVector<f64, N>) -> Option<SVector<f64, N>>
where
    Const<N>: DimMin<Const<N>, Output = Const<N>>,
{
    solve_fixed(a, b)
}

/// Partially pivoted dense solve for the shooting system.
pub fn solve_dense(a: DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let lu = a.lu();
    if pivot_ratio(&lu.u()) < PIVOT_RTOL {
        return None;
    }
    lu.solve(b)
}

/// `min |U_ii| / max |U_ii|` of an upper-triangular factor.
pub fn pivot_ratio<R: Dim, C: Dim, S: RawStorage<f64, R, C>>(u: &Matrix<f64, R, C, S>) -> f64 {
    let n = u.nrows().min(u.ncols());
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for i in 0..n {
        let v = u[(i, i)].abs();
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if hi == 0.0 || !lo.is_finite() {
        0.0
    } else {
        lo / hi
    }
}

/// 2-norm condition number from the singular values; `inf` when singular.
pub fn condition_number(a: &DMatrix<f64>) -> f64 {
    let sv = a.singular_values();
    let hi = sv.max();
    let lo = sv.min();
    if lo == 0.0 || !lo.is_finite() {
        f64::INFINITY
    } else {
        hi / lo
    }
}

pub fn condition_number3(a: &SMatrix<f64, 3, 3>) -> f64 {
    let sv = a.singular_values();
    let hi = sv.max();
    let lo = sv.min();
    if lo == 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// Numerical rank from a fully pivoted LU, with pivots below `rtol·max` treated as zero.
pub fn numerical_rank(a: &DMatrix<f64>, rtol: f64) -> usize {
    let lu = a.clone().full_piv_lu();
    let u = lu.u();
    let n = u.nrows().min(u.ncols());
    let hi = (0..n).map(|i| u[(i, i)].abs()).fold(0.0, f64::max);
    (0..n).filter(|&i| u[(i, i)].abs() > rtol * hi).count()
}
