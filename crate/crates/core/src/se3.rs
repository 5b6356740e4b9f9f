//! Rigid-body transformations on SE(3).
//!
//! Tangent vectors ([`Twist`]) are ordered `[rotation | translation]`. Poses
//! keep their rotation as a unit quaternion so that the text formats can round
//! trip them bit for bit; matrices are produced on demand.

use std::fmt;
use std::ops::Mul;

use nalgebra::{Isometry3, Matrix3, Matrix4, Matrix6, Quaternion, Translation3, UnitQuaternion, Vector3, Vector6};

use crate::error::{Error, Result};

/// A point in 3D (meters).
pub type Point3 = nalgebra::Point3<f64>;

/// Element of the Lie algebra se(3), `[ω | v]`.
pub type Twist = Vector6<f64>;

/// Rotation angles at or above `π - LOG_SINGULARITY_MARGIN` are rejected by [`Pose::log`].
pub const LOG_SINGULARITY_MARGIN: f64 = 1e-6;

const SMALL_ANGLE: f64 = 1e-5;

/// Rigid transform with rotation and translation.
#[derive(Clone, Copy, PartialEq)]
pub struct Pose(Isometry3<f64>);

impl Pose {
    pub fn identity() -> Self {
        Pose(Isometry3::identity())
    }

    pub fn new(rotation: UnitQuaternion<f64>, translation: Vector3<f64>) -> Self {
        Pose(Isometry3::from_parts(Translation3::from(translation), rotation))
    }

    /// Pure translation.
    pub fn from_translation(x: f64, y: f64, z: f64) -> Self {
        Pose::new(UnitQuaternion::identity(), Vector3::new(x, y, z))
    }

    /// Rotation about `axis` by `angle` radians with zero translation.
    pub fn from_axis_angle(axis: Vector3<f64>, angle: f64) -> Self {
        let axis = axis.normalize();
        Pose::new(quaternion_exp(&(axis * angle)), Vector3::zeros())
    }

    /// Rotation about the z axis; handy in tests and scene definitions.
    pub fn rot_z(angle: f64) -> Self {
        Pose::from_axis_angle(Vector3::z(), angle)
    }

    /// Builds a pose from a rotation matrix, which must be orthonormal.
    pub fn from_matrix_parts(rotation: &Matrix3<f64>, translation: Vector3<f64>) -> Self {
        let rot = nalgebra::Rotation3::from_matrix_unchecked(*rotation);
        Pose::new(UnitQuaternion::from_rotation_matrix(&rot), translation)
    }

    /// Builds a pose from raw quaternion components without renormalizing.
    ///
    /// The caller is responsible for `(x, y, z, w)` being unit length.
    pub fn from_raw_parts(translation: Vector3<f64>, qx: f64, qy: f64, qz: f64, qw: f64) -> Self {
        let q = UnitQuaternion::new_unchecked(Quaternion::new(qw, qx, qy, qz));
        Pose::new(q, translation)
    }

    pub fn isometry(&self) -> &Isometry3<f64> {
        &self.0
    }

    pub fn translation(&self) -> Vector3<f64> {
        self.0.translation.vector
    }

    pub fn quaternion(&self) -> UnitQuaternion<f64> {
        self.0.rotation
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        *self.0.rotation.to_rotation_matrix().matrix()
    }

    /// 4×4 homogeneous matrix.
    pub fn matrix(&self) -> Matrix4<f64> {
        self.0.to_homogeneous()
    }

    pub fn inverse(&self) -> Pose {
        Pose(self.0.inverse())
    }

    pub fn compose(&self, other: &Pose) -> Pose {
        Pose(self.0 * other.0)
    }

    /// `self⁻¹ · other` without forming the inverse explicitly.
    pub fn between(&self, other: &Pose) -> Pose {
        Pose(self.0.inv_mul(&other.0))
    }

    pub fn transform_point(&self, p: &Point3) -> Point3 {
        self.0 * p
    }

    pub fn inverse_transform_point(&self, p: &Point3) -> Point3 {
        self.0.inverse_transform_point(p)
    }

    /// Rotation angle in `[0, π]`.
    pub fn angle(&self) -> f64 {
        quaternion_log(&self.0.rotation).norm()
    }

    /// Closed-form exponential of a twist.
    pub fn exp(xi: &Twist) -> Pose {
        let omega = xi.fixed_rows::<3>(0).into_owned();
        let v = xi.fixed_rows::<3>(3).into_owned();
        Pose::new(quaternion_exp(&omega), so3_left_jacobian(&omega) * v)
    }

    /// Logarithm as a twist; fails when the rotation angle is too close to π.
    pub fn log(&self) -> Result<Twist> {
        let omega = quaternion_log(&self.0.rotation);
        let angle = omega.norm();
        if angle >= std::f64::consts::PI - LOG_SINGULARITY_MARGIN {
            return Err(Error::LogSingularity { angle });
        }
        let v = so3_left_jacobian_inv(&omega) * self.translation();
        let mut xi = Twist::zeros();
        xi.fixed_rows_mut::<3>(0).copy_from(&omega);
        xi.fixed_rows_mut::<3>(3).copy_from(&v);
        Ok(xi)
    }

    /// Adjoint acting on `[ω | v]` twists: `Ad_T ξ = log(T · exp(ξ) · T⁻¹)`.
    pub fn adjoint(&self) -> Matrix6<f64> {
        let r = self.rotation();
        let mut ad = Matrix6::zeros();
        ad.fixed_view_mut::<3, 3>(0, 0).copy_from(&r);
        ad.fixed_view_mut::<3, 3>(3, 3).copy_from(&r);
        ad.fixed_view_mut::<3, 3>(3, 0).copy_from(&(hat(&self.translation()) * r));
        ad
    }

    /// Largest elementwise difference between the homogeneous matrices.
    pub fn max_abs_diff(&self, other: &Pose) -> f64 {
        (self.matrix() - other.matrix()).amax()
    }
}

impl Default for Pose {
    fn default() -> Self {
        Pose::identity()
    }
}

impl Mul for Pose {
    type Output = Pose;

    fn mul(self, rhs: Pose) -> Pose {
        self.compose(&rhs)
    }
}

impl Mul<&Pose> for &Pose {
    type Output = Pose;

    fn mul(self, rhs: &Pose) -> Pose {
        self.compose(rhs)
    }
}

impl fmt::Debug for Pose {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let t = self.translation();
        let q = self.quaternion();
        write!(
            f,
            "Pose(t: [{:.6}, {:.6}, {:.6}], q: [{:.6}, {:.6}, {:.6}, {:.6}])",
            t.x, t.y, t.z, q.i, q.j, q.k, q.w
        )
    }
}

/// World-frame motion of a body whose motion in its own frame is `body_motion`
/// and whose pose is `ref_pose`: `ref · body · ref⁻¹`.
pub fn frame_change_motion(body_motion: &Pose, ref_pose: &Pose) -> Pose {
    ref_pose.compose(body_motion).compose(&ref_pose.inverse())
}

/// Rigid-body point update `m_k = H · m_{k-1}`.
pub fn transform_point(motion: &Pose, p: &Point3) -> Point3 {
    motion.transform_point(p)
}

/// Skew-symmetric matrix of `v`.
pub fn hat(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

fn quaternion_exp(omega: &Vector3<f64>) -> UnitQuaternion<f64> {
    let theta = omega.norm();
    let half = 0.5 * theta;
    let (w, k) = if theta < SMALL_ANGLE {
        let t2 = theta * theta;
        (1.0 - t2 / 8.0, 0.5 - t2 / 48.0)
    } else {
        (half.cos(), half.sin() / theta)
    };
    UnitQuaternion::new_normalize(Quaternion::new(w, k * omega.x, k * omega.y, k * omega.z))
}

fn quaternion_log(q: &UnitQuaternion<f64>) -> Vector3<f64> {
    let (mut w, mut v) = (q.w, q.imag());
    if w < 0.0 {
        w = -w;
        v = -v;
    }
    let n = v.norm();
    if n < 1e-12 {
        // θ ≈ 2n, and atan2(n, w)/n → 1/w for small n.
        return v * (2.0 / w);
    }
    v * (2.0 * n.atan2(w) / n)
}

/// Left Jacobian of SO(3); also the `V` matrix of the SE(3) exponential.
pub fn so3_left_jacobian(omega: &Vector3<f64>) -> Matrix3<f64> {
    let theta2 = omega.norm_squared();
    let theta = theta2.sqrt();
    let w = hat(omega);
    let (a, b) = if theta < SMALL_ANGLE {
        (0.5 - theta2 / 24.0, 1.0 / 6.0 - theta2 / 120.0)
    } else {
        ((1.0 - theta.cos()) / theta2, (theta - theta.sin()) / (theta2 * theta))
    };
    Matrix3::identity() + w * a + w * w * b
}

pub fn so3_left_jacobian_inv(omega: &Vector3<f64>) -> Matrix3<f64> {
    let theta2 = omega.norm_squared();
    let theta = theta2.sqrt();
    let w = hat(omega);
    let c = if theta < SMALL_ANGLE {
        1.0 / 12.0 + theta2 / 720.0
    } else {
        1.0 / theta2 - (1.0 + theta.cos()) / (2.0 * theta * theta.sin())
    };
    Matrix3::identity() - w * 0.5 + w * w * c
}

/// Coupling block `Q(v, ω)` of the SE(3) left Jacobian.
fn se3_q_block(omega: &Vector3<f64>, v: &Vector3<f64>) -> Matrix3<f64> {
    let theta2 = omega.norm_squared();
    let theta = theta2.sqrt();
    let p = hat(omega);
    let r = hat(v);
    let (c1, c2, c3) = if theta < SMALL_ANGLE {
        (1.0 / 6.0 - theta2 / 120.0, 1.0 / 24.0 - theta2 / 720.0, 1.0 / 120.0 - theta2 / 2520.0)
    } else {
        let (s, c) = theta.sin_cos();
        let t4 = theta2 * theta2;
        (
            (theta - s) / (theta2 * theta),
            (theta2 + 2.0 * c - 2.0) / (2.0 * t4),
            (2.0 * theta - 3.0 * s + theta * c) / (2.0 * t4 * theta),
        )
    };
    let pr = p * r;
    let rp = r * p;
    let prp = pr * p;
    r * 0.5 + (pr + rp + prp) * c1 + (p * pr + rp * p - prp * 3.0) * c2 + (prp * p + p * prp) * c3
}

/// Left Jacobian of SE(3) in `[ω | v]` ordering.
pub fn se3_left_jacobian(xi: &Twist) -> Matrix6<f64> {
    let omega = xi.fixed_rows::<3>(0).into_owned();
    let v = xi.fixed_rows::<3>(3).into_owned();
    let j = so3_left_jacobian(&omega);
    let mut out = Matrix6::zeros();
    out.fixed_view_mut::<3, 3>(0, 0).copy_from(&j);
    out.fixed_view_mut::<3, 3>(3, 3).copy_from(&j);
    out.fixed_view_mut::<3, 3>(3, 0).copy_from(&se3_q_block(&omega, &v));
    out
}

pub fn se3_left_jacobian_inv(xi: &Twist) -> Matrix6<f64> {
    let omega = xi.fixed_rows::<3>(0).into_owned();
    let v = xi.fixed_rows::<3>(3).into_owned();
    let j_inv = so3_left_jacobian_inv(&omega);
    let q = se3_q_block(&omega, &v);
    let mut out = Matrix6::zeros();
    out.fixed_view_mut::<3, 3>(0, 0).copy_from(&j_inv);
    out.fixed_view_mut::<3, 3>(3, 3).copy_from(&j_inv);
    out.fixed_view_mut::<3, 3>(3, 0).copy_from(&(-j_inv * q * j_inv));
    out
}

/// Inverse right Jacobian: `log(exp(ξ)·exp(δ)) ≈ ξ + J_r⁻¹(ξ) δ`.
pub fn se3_right_jacobian_inv(xi: &Twist) -> Matrix6<f64> {
    se3_left_jacobian_inv(&(-xi))
}
