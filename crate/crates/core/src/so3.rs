//! Rotation-group primitives.
//!
//! Vectors and matrices are plain `nalgebra` fixed-size types. [`Rotation`]
//! and [`UnitQuaternion`] are checked newtypes: they are validated on
//! construction and never silently re-orthogonalized, so drift surfaces as
//! an error instead of being hidden.

use nalgebra::{Matrix3, Vector3};
use std::f64::consts::PI;
use thiserror::Error;

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Below this angle the exponential and logarithm switch to Taylor forms.
pub const SMALL_ANGLE: f64 = 1e-8;
/// The logarithm refuses rotations whose angle is within this margin of π.
pub const PI_MARGIN: f64 = 1e-6;
/// Maximum entry of `RᵀR − I` tolerated by [`Rotation::new`].
pub const ORTHOGONALITY_TOL: f64 = 1e-9;
/// Maximum `|‖q‖² − 1|` tolerated by [`UnitQuaternion::new`].
pub const QUAT_NORM_TOL: f64 = 1e-12;
const SKEW_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum So3Error {
    #[error("matrix is not skew-symmetric (max |S + Sᵀ| = {0:e})")]
    NotSkewSymmetric(f64),
    #[error("rotation angle {0} rad is too close to π for a well-defined logarithm")]
    AngleNearPi(f64),
    #[error("quaternion is not normalized (|‖q‖² − 1| = {0:e})")]
    NotNormalized(f64),
    #[error("matrix is not a rotation (max |RᵀR − I| = {orth:e}, det = {det})")]
    NotRotation { orth: f64, det: f64 },
    #[error("non-finite entry")]
    NonFinite,
}

/// Cross-product matrix: `hat(v) * w == v.cross(&w)`.
pub fn hat(v: &Vec3) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Inverse of [`hat`]. Rejects matrices that are not skew-symmetric.
pub fn vee(s: &Mat3) -> Result<Vec3, So3Error> {
    let asym = (s + s.transpose()).amax();
    if !(asym <= SKEW_TOL) {
        return Err(So3Error::NotSkewSymmetric(asym));
    }
    Ok(vee_unchecked(s))
}

/// Reads the skew entries without checking symmetry.
pub(crate) fn vee_unchecked(s: &Mat3) -> Vec3 {
    Vec3::new(s[(2, 1)], s[(0, 2)], s[(1, 0)])
}

/// `(A − Aᵀ) / 2`.
pub fn skew_part(a: &Mat3) -> Mat3 {
    (a - a.transpose()) * 0.5
}

/// `vee(skew_part(A))`, always defined.
pub fn skew_vee(a: &Mat3) -> Vec3 {
    vee_unchecked(&skew_part(a))
}

/// Rodrigues exponential `so(3) → SO(3)`.
pub fn exp_rodrigues(xi: &Vec3) -> Rotation {
    let theta = xi.norm();
    let k = hat(xi);
    let m = if theta < SMALL_ANGLE {
        Mat3::identity() + k + k * k * 0.5
    } else {
        let (s, c) = theta.sin_cos();
        Mat3::identity() + k * (s / theta) + k * k * ((1.0 - c) / (theta * theta))
    };
    Rotation(m)
}

/// Principal logarithm `SO(3) → R³` (angle times axis).
pub fn log_map(r: &Rotation) -> Result<Vec3, So3Error> {
    let m = &r.0;
    let axis2 = vee_unchecked(&(m - m.transpose()));
    let sin_theta = 0.5 * axis2.norm();
    let cos_theta = 0.5 * (m.trace() - 1.0);
    let theta = sin_theta.atan2(cos_theta);
    if theta >= PI - PI_MARGIN {
        return Err(So3Error::AngleNearPi(theta));
    }
    if theta < SMALL_ANGLE {
        return Ok(axis2 * 0.5);
    }
    Ok(axis2 * (theta / (2.0 * sin_theta)))
}

/// Inverse right Jacobian of SO(3): for `M = exp(c)`, a right perturbation
/// `M·exp(ω)` moves `log(M)` by `right_jacobian_inv(c) · ω` to first order.
pub fn right_jacobian_inv(c: &Vec3) -> Mat3 {
    let theta = c.norm();
    let k = hat(c);
    let coeff = if theta < 1e-4 {
        1.0 / 12.0 + theta * theta / 720.0
    } else {
        let (s, co) = theta.sin_cos();
        1.0 / (theta * theta) - (1.0 + co) / (2.0 * theta * s)
    };
    Mat3::identity() + k * 0.5 + k * k * coeff
}

/// A 3×3 special-orthogonal matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation(Mat3);

impl Rotation {
    /// Validates orthogonality and orientation.
    pub fn new(m: Mat3) -> Result<Self, So3Error> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(So3Error::NonFinite);
        }
        let orth = (m.transpose() * m - Mat3::identity()).amax();
        let det = m.determinant();
        if orth > ORTHOGONALITY_TOL || det <= 0.0 {
            return Err(So3Error::NotRotation { orth, det });
        }
        Ok(Rotation(m))
    }

    pub fn identity() -> Self {
        Rotation(Mat3::identity())
    }

    /// Rotation of `angle` radians about `axis` (normalized here).
    pub fn from_axis_angle(axis: &Vec3, angle: f64) -> Self {
        exp_rodrigues(&(axis.normalize() * angle))
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        Rotation(self.0.transpose())
    }

    pub fn compose(&self, other: &Rotation) -> Self {
        Rotation(self.0 * other.0)
    }

    pub fn apply(&self, v: &Vec3) -> Vec3 {
        self.0 * v
    }

    /// Max entry of `RᵀR − I`.
    pub fn orthogonality_error(&self) -> f64 {
        (self.0.transpose() * self.0 - Mat3::identity()).amax()
    }

    /// Rotation angle in `[0, π]`.
    pub fn angle(&self) -> f64 {
        let s = 0.5 * vee_unchecked(&(self.0 - self.0.transpose())).norm();
        let c = 0.5 * (self.0.trace() - 1.0);
        s.atan2(c)
    }

    /// Shepperd's method; the result is canonicalized to `q0 ≥ 0`.
    pub fn to_quaternion(&self) -> UnitQuaternion {
        let m = &self.0;
        let tr = m.trace();
        let cands = [tr, m[(0, 0)], m[(1, 1)], m[(2, 2)]];
        let mut best = 0;
        for (i, v) in cands.iter().enumerate() {
            if *v > cands[best] {
                best = i;
            }
        }
        let q = match best {
            0 => {
                let s = 2.0 * (1.0 + tr).sqrt();
                [
                    0.25 * s,
                    (m[(2, 1)] - m[(1, 2)]) / s,
                    (m[(0, 2)] - m[(2, 0)]) / s,
                    (m[(1, 0)] - m[(0, 1)]) / s,
                ]
            }
            1 => {
                let s = 2.0 * (1.0 + m[(0, 0)] - m[(1, 1)] - m[(2, 2)]).sqrt();
                [
                    (m[(2, 1)] - m[(1, 2)]) / s,
                    0.25 * s,
                    (m[(0, 1)] + m[(1, 0)]) / s,
                    (m[(0, 2)] + m[(2, 0)]) / s,
                ]
            }
            2 => {
                let s = 2.0 * (1.0 - m[(0, 0)] + m[(1, 1)] - m[(2, 2)]).sqrt();
                [
                    (m[(0, 2)] - m[(2, 0)]) / s,
                    (m[(0, 1)] + m[(1, 0)]) / s,
                    0.25 * s,
                    (m[(1, 2)] + m[(2, 1)]) / s,
                ]
            }
            _ => {
                let s = 2.0 * (1.0 - m[(0, 0)] - m[(1, 1)] + m[(2, 2)]).sqrt();
                [
                    (m[(1, 0)] - m[(0, 1)]) / s,
                    (m[(0, 2)] + m[(2, 0)]) / s,
                    (m[(1, 2)] + m[(2, 1)]) / s,
                    0.25 * s,
                ]
            }
        };
        UnitQuaternion::normalized(q)
    }
}

/// Unit quaternion `(q0, q1, q2, q3)` with scalar part first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitQuaternion([f64; 4]);

impl UnitQuaternion {
    /// Checks the norm and flips the sign so that `q0 ≥ 0`.
    pub fn new(q: [f64; 4]) -> Result<Self, So3Error> {
        if q.iter().any(|v| !v.is_finite()) {
            return Err(So3Error::NonFinite);
        }
        let err = (q.iter().map(|v| v * v).sum::<f64>() - 1.0).abs();
        if err > QUAT_NORM_TOL {
            return Err(So3Error::NotNormalized(err));
        }
        Ok(Self::canonical(q))
    }

    /// Divides by the norm, then canonicalizes the sign.
    pub fn normalized(q: [f64; 4]) -> Self {
        let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        Self::canonical([q[0] / n, q[1] / n, q[2] / n, q[3] / n])
    }

    pub fn identity() -> Self {
        UnitQuaternion([1.0, 0.0, 0.0, 0.0])
    }

    fn canonical(q: [f64; 4]) -> Self {
        if q[0] < 0.0 {
            UnitQuaternion([-q[0], -q[1], -q[2], -q[3]])
        } else {
            UnitQuaternion(q)
        }
    }

    pub fn as_array(&self) -> [f64; 4] {
        self.0
    }

    pub fn to_rotation(&self) -> Rotation {
        Rotation(quat_matrix(&self.0))
    }
}

/// Rotation matrix of a unit quaternion; checks the norm first.
pub fn quat_to_rotation(q: &UnitQuaternion) -> Result<Rotation, So3Error> {
    let err = (q.0.iter().map(|v| v * v).sum::<f64>() - 1.0).abs();
    if err > QUAT_NORM_TOL {
        return Err(So3Error::NotNormalized(err));
    }
    Ok(q.to_rotation())
}

/// The quadratic quaternion-to-matrix map, evaluated for any 4-vector.
pub(crate) fn quat_matrix(q: &[f64; 4]) -> Mat3 {
    let [q0, q1, q2, q3] = *q;
    Mat3::new(
        q0 * q0 + q1 * q1 - q2 * q2 - q3 * q3,
        2.0 * q1 * q2 - 2.0 * q0 * q3,
        2.0 * q1 * q3 + 2.0 * q0 * q2,
        2.0 * q1 * q2 + 2.0 * q0 * q3,
        q0 * q0 - q1 * q1 + q2 * q2 - q3 * q3,
        2.0 * q2 * q3 - 2.0 * q0 * q1,
        2.0 * q1 * q3 - 2.0 * q0 * q2,
        2.0 * q2 * q3 + 2.0 * q0 * q1,
        q0 * q0 - q1 * q1 - q2 * q2 + q3 * q3,
    )
}

/// Partial derivatives of [`quat_matrix`] with respect to `q0..q3`.
pub(crate) fn quat_matrix_partials(q: &[f64; 4]) -> [Mat3; 4] {
    let [q0, q1, q2, q3] = *q;
    [
        Mat3::new(q0, -q3, q2, q3, q0, -q1, -q2, q1, q0) * 2.0,
        Mat3::new(q1, q2, q3, q2, -q1, -q0, q3, q0, -q1) * 2.0,
        Mat3::new(-q2, q1, q0, q1, q2, q3, -q0, q3, -q2) * 2.0,
        Mat3::new(-q3, -q0, q1, q0, -q3, q2, q1, q2, q3) * 2.0,
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_vec(rng: &mut ChaCha8Rng, scale: f64) -> Vec3 {
        Vec3::new(
            rng.random_range(-scale..scale),
            rng.random_range(-scale..scale),
            rng.random_range(-scale..scale),
        )
    }

    fn rand_ball(rng: &mut ChaCha8Rng, radius: f64) -> Vec3 {
        loop {
            let v = rand_vec(rng, radius);
            if v.norm() <= radius {
                return v;
            }
        }
    }

    fn rand_unit_quat(rng: &mut ChaCha8Rng) -> [f64; 4] {
        let v: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.map(|x| x / n)
    }

    #[test]
    fn hat_examples() {
        assert_eq!(hat(&Vec3::zeros()), Mat3::zeros());
        let expected = Mat3::new(0.0, -3.0, 2.0, 3.0, 0.0, -1.0, -2.0, 1.0, 0.0);
        assert_eq!(hat(&Vec3::new(1.0, 2.0, 3.0)), expected);
    }

    #[test]
    fn hat_matches_componentwise_cross_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let v = rand_vec(&mut rng, 5.0);
            let w = rand_vec(&mut rng, 5.0);
            let cross = Vec3::new(v.y * w.z - v.z * w.y, v.z * w.x - v.x * w.z, v.x * w.y - v.y * w.x);
            assert_abs_diff_eq!(hat(&v) * w, cross, epsilon = 1e-12);
        }
    }

    #[test]
    fn vee_inverts_hat_exactly() {
        assert_eq!(vee(&hat(&Vec3::new(1.0, 2.0, 3.0))).unwrap(), Vec3::new(1.0, 2.0, 3.0));
        assert_eq!(vee(&Mat3::zeros()).unwrap(), Vec3::zeros());
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let v = rand_vec(&mut rng, 100.0);
            assert_eq!(vee(&hat(&v)).unwrap(), v);
        }
    }

    #[test]
    fn vee_rejects_symmetric_input() {
        let m = Mat3::identity();
        assert!(matches!(vee(&m), Err(So3Error::NotSkewSymmetric(_))));
    }

    #[test]
    fn exp_examples() {
        assert_eq!(*exp_rodrigues(&Vec3::zeros()).matrix(), Mat3::identity());
        let r = exp_rodrigues(&Vec3::new(PI / 2.0, 0.0, 0.0));
        let expected = Mat3::new(1.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0);
        assert_abs_diff_eq!(*r.matrix(), expected, epsilon = 1e-15);
    }

    #[test]
    fn exp_matches_power_series() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let xi = rand_ball(&mut rng, 3.0);
            let k = hat(&xi);
            let mut term = Mat3::identity();
            let mut sum = Mat3::identity();
            for n in 1..20 {
                term = term * k / n as f64;
                sum += term;
            }
            // the 20-term series truncation error at ‖ξ‖ = 3 is ~3^20/20! ≈ 1.4e-9;
            // keep going until it is below round-off
            for n in 20..40 {
                term = term * k / n as f64;
                sum += term;
            }
            assert_abs_diff_eq!(*exp_rodrigues(&xi).matrix(), sum, epsilon = 1e-12);
        }
    }

    #[test]
    fn exp_small_angle_branch_is_continuous() {
        let xi = Vec3::new(3e-9, -2e-9, 1e-9);
        let r = exp_rodrigues(&xi);
        assert!(r.orthogonality_error() < 1e-15);
        assert_abs_diff_eq!(log_map(&r).unwrap(), xi, epsilon = 1e-20);
    }

    #[test]
    fn log_examples() {
        assert_eq!(log_map(&Rotation::identity()).unwrap(), Vec3::zeros());
        let xi = Vec3::new(0.3, -0.2, 0.1);
        assert_abs_diff_eq!(log_map(&exp_rodrigues(&xi)).unwrap(), xi, epsilon = 1e-12);
    }

    #[test]
    fn log_exp_roundtrip_below_pi() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let xi = rand_ball(&mut rng, PI - 0.1);
            let r = exp_rodrigues(&xi);
            let back = log_map(&r).unwrap();
            assert!((back - xi).amax() < 1e-10);
            assert!((exp_rodrigues(&back).matrix() - r.matrix()).amax() < 1e-10);
        }
    }

    #[test]
    fn log_refuses_half_turn() {
        let r = exp_rodrigues(&Vec3::new(0.0, 0.0, PI));
        assert!(matches!(log_map(&r), Err(So3Error::AngleNearPi(_))));
    }

    #[test]
    fn quaternion_examples() {
        let id = UnitQuaternion::new([1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(*quat_to_rotation(&id).unwrap().matrix(), Mat3::identity());
        let th: f64 = 0.7;
        let q = UnitQuaternion::new([(th / 2.0).cos(), (th / 2.0).sin(), 0.0, 0.0]).unwrap();
        let expected = exp_rodrigues(&Vec3::new(th, 0.0, 0.0));
        assert_abs_diff_eq!(
            *quat_to_rotation(&q).unwrap().matrix(),
            *expected.matrix(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn quaternion_rejects_non_unit() {
        assert!(matches!(
            UnitQuaternion::new([1.0, 1.0, 0.0, 0.0]),
            Err(So3Error::NotNormalized(_))
        ));
    }

    #[test]
    fn quaternion_sign_is_canonical() {
        let q = UnitQuaternion::new([-1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(q.as_array(), [1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn quaternion_matrix_is_orthogonal_and_roundtrips() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let q = UnitQuaternion::normalized(rand_unit_quat(&mut rng));
            let r = quat_to_rotation(&q).unwrap();
            assert!(r.orthogonality_error() < 1e-12);
            assert!((r.matrix().determinant() - 1.0).abs() < 1e-12);
            let back = r.to_quaternion().as_array();
            for (a, b) in back.iter().zip(q.as_array()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn quat_partials_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let q = rand_unit_quat(&mut rng);
        let partials = quat_matrix_partials(&q);
        for n in 0..4 {
            let mut qp = q;
            let mut qm = q;
            qp[n] += 1e-6;
            qm[n] -= 1e-6;
            let fd = (quat_matrix(&qp) - quat_matrix(&qm)) / 2e-6;
            assert_abs_diff_eq!(fd, partials[n], epsilon = 1e-8);
        }
    }

    #[test]
    fn skew_part_examples() {
        let sym = Mat3::new(1.0, 2.0, 3.0, 2.0, 4.0, 5.0, 3.0, 5.0, 6.0);
        assert_eq!(skew_part(&sym), Mat3::zeros());
        let r = exp_rodrigues(&Vec3::new(0.2, 0.0, 0.0));
        let expected = hat(&Vec3::new(1.0, 0.0, 0.0)) * 0.2f64.sin();
        assert_abs_diff_eq!(skew_part(r.matrix()), expected, epsilon = 1e-15);
        let h = hat(&Vec3::new(-1.0, 0.5, 2.0));
        assert_eq!(skew_part(&h), h);
    }

    #[test]
    fn right_jacobian_inverse_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &radius in &[1e-5, 0.5, 2.5] {
            let c = rand_ball(&mut rng, radius);
            let m = exp_rodrigues(&c);
            let jinv = right_jacobian_inv(&c);
            for i in 0..3 {
                let mut w = Vec3::zeros();
                w[i] = 1e-6;
                let p = log_map(&m.compose(&exp_rodrigues(&w))).unwrap();
                let n = log_map(&m.compose(&exp_rodrigues(&-w))).unwrap();
                let fd = (p - n) / 2e-6;
                assert!((fd - jinv.column(i)).amax() < 1e-7, "radius {radius}");
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn vec3(scale: f64) -> impl Strategy<Value = Vec3> {
            (-scale..scale, -scale..scale, -scale..scale).prop_map(|(x, y, z)| Vec3::new(x, y, z))
        }

        fn rotation() -> impl Strategy<Value = Rotation> {
            vec3(1.8).prop_map(|v| exp_rodrigues(&v))
        }

        proptest! {
            #[test]
            fn conjugation_identity(f in rotation(), x in vec3(10.0)) {
                let lhs = hat(&(f.matrix().transpose() * x));
                let rhs = f.matrix().transpose() * hat(&x) * f.matrix();
                prop_assert!((lhs - rhs).amax() < 1e-12);
            }

            #[test]
            fn trace_identity(
                a in proptest::array::uniform9(-5.0f64..5.0),
                x in vec3(5.0),
            ) {
                let a = Mat3::from_row_slice(&a);
                let lhs = hat(&x) * a + a.transpose() * hat(&x);
                let rhs = hat(&((Mat3::identity() * a.trace() - a) * x));
                prop_assert!((lhs - rhs).amax() < 1e-12);
            }

            #[test]
            fn exp_log_roundtrip(xi in vec3(1.8)) {
                prop_assume!(xi.norm() < PI - 0.01);
                let r = exp_rodrigues(&xi);
                prop_assert!((log_map(&r).unwrap() - xi).amax() < 1e-10);
            }

            #[test]
            fn log_exp_roundtrip(r in rotation()) {
                let back = exp_rodrigues(&log_map(&r).unwrap());
                prop_assert!((back.matrix() - r.matrix()).amax() < 1e-10);
            }
        }
    }
}
