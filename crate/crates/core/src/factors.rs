//! Residual functions of the dynamic SLAM factors and their analytic Jacobians.
//!
//! All Jacobians are taken with respect to right perturbations: a pose `P`
//! moves to `P · exp(δ)` with `δ = [φ | ρ]`, a point `p` moves to `p + δ`.

use nalgebra::{DMatrix, DVector, Matrix3, Matrix3x6, Matrix6, SMatrix, Vector3, Vector4};

use crate::error::{Error, Result};
use crate::graph::{NoiseModel, Values, VariableKey};
use crate::se3::{hat, se3_left_jacobian_inv, se3_right_jacobian_inv, Point3, Pose, Twist};

/// Point residual `z − X⁻¹·m` in the camera frame.
pub fn point_measurement_residual(camera: &Pose, point: &Point3, measured: &Point3) -> Vector3<f64> {
    measured - camera.inverse_transform_point(point)
}

/// Odometry residual `log(X_k⁻¹ · X_{k−1} · T)`.
pub fn odometry_residual(prev: &Pose, next: &Pose, measured: &Pose) -> Result<Twist> {
    next.between(prev).compose(measured).log()
}

/// Rigid point motion residual `m_k − H · m_{k−1}`.
pub fn world_motion_ternary_residual(point: &Point3, prev_point: &Point3, motion: &Pose) -> Vector3<f64> {
    point - motion.transform_point(prev_point)
}

/// Motion smoothing residual `log(H_a⁻¹ · H_b)`.
pub fn motion_smoothing_residual(first: &Pose, second: &Pose) -> Result<Twist> {
    first.between(second).log()
}

/// Object-frame point residual `z − X⁻¹ · L · m_L`.
pub fn object_centric_point_residual(
    camera: &Pose,
    object: &Pose,
    local: &Point3,
    measured: &Point3,
) -> Vector3<f64> {
    measured - camera.inverse_transform_point(&object.transform_point(local))
}

/// Object-centric motion residual `(L_k − H · L_{k−1}) · [m_L, 1]`, first three rows.
///
/// The difference of two homogeneous matrices is not a rigid transform; the
/// residual is evaluated literally in that form.
pub fn object_centric_motion_residual(object: &Pose, prev_object: &Pose, motion: &Pose, local: &Point3) -> Vector3<f64> {
    let diff = object.matrix() - motion.compose(prev_object).matrix();
    let r = diff * Vector4::new(local.x, local.y, local.z, 1.0);
    Vector3::new(r.x, r.y, r.z)
}

/// Object kinematic residual `log(L_k⁻¹ · H · L_{k−1})`.
pub fn object_kinematic_residual(object: &Pose, prev_object: &Pose, motion: &Pose) -> Result<Twist> {
    object.between(&motion.compose(prev_object)).log()
}

/// Pose prior residual `log(P⁻¹ · mean)`, i.e. `−log(mean⁻¹ · P)`.
pub fn prior_pose_residual(estimate: &Pose, mean: &Pose) -> Result<Twist> {
    estimate.between(mean).log()
}

/// Point prior residual `mean − p`.
pub fn prior_point_residual(estimate: &Point3, mean: &Point3) -> Vector3<f64> {
    mean - estimate
}

/// Jacobian of `P · p` with respect to a right perturbation of `P`.
fn transformed_point_jacobian(pose: &Pose, p: &Point3) -> Matrix3x6<f64> {
    let r = pose.rotation();
    let mut j = Matrix3x6::zeros();
    j.fixed_view_mut::<3, 3>(0, 0).copy_from(&(-r * hat(&p.coords)));
    j.fixed_view_mut::<3, 3>(0, 3).copy_from(&r);
    j
}

/// Jacobian of `P⁻¹ · m` with respect to a right perturbation of `P`.
fn inverse_transformed_point_jacobian(pose: &Pose, m: &Point3) -> Matrix3x6<f64> {
    let q = pose.inverse_transform_point(m);
    let mut j = Matrix3x6::zeros();
    j.fixed_view_mut::<3, 3>(0, 0).copy_from(&hat(&q.coords));
    j.fixed_view_mut::<3, 3>(0, 3).copy_from(&-Matrix3::identity());
    j
}

/// Tag for each factor type.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FactorKind {
    PointMeasurementWorld,
    CameraOdometry,
    WorldMotionTernary,
    MotionSmoothing,
    PointMeasurementObjectCentric,
    ObjectCentricMotion,
    ObjectKinematic,
    PriorPose,
    PriorPoint,
}

impl FactorKind {
    pub const ALL: [FactorKind; 9] = [
        FactorKind::PointMeasurementWorld,
        FactorKind::CameraOdometry,
        FactorKind::WorldMotionTernary,
        FactorKind::MotionSmoothing,
        FactorKind::PointMeasurementObjectCentric,
        FactorKind::ObjectCentricMotion,
        FactorKind::ObjectKinematic,
        FactorKind::PriorPose,
        FactorKind::PriorPoint,
    ];

    pub fn arity(&self) -> usize {
        match self {
            FactorKind::PriorPose | FactorKind::PriorPoint => 1,
            FactorKind::PointMeasurementWorld | FactorKind::CameraOdometry | FactorKind::MotionSmoothing => 2,
            FactorKind::WorldMotionTernary
            | FactorKind::PointMeasurementObjectCentric
            | FactorKind::ObjectKinematic => 3,
            FactorKind::ObjectCentricMotion => 4,
        }
    }

    pub fn residual_dim(&self) -> usize {
        match self {
            FactorKind::CameraOdometry
            | FactorKind::MotionSmoothing
            | FactorKind::ObjectKinematic
            | FactorKind::PriorPose => 6,
            _ => 3,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            FactorKind::PointMeasurementWorld => "PointMeasurementWorld",
            FactorKind::CameraOdometry => "CameraOdometry",
            FactorKind::WorldMotionTernary => "WorldMotionTernary",
            FactorKind::MotionSmoothing => "MotionSmoothing",
            FactorKind::PointMeasurementObjectCentric => "PointMeasurementObjectCentric",
            FactorKind::ObjectCentricMotion => "ObjectCentricMotion",
            FactorKind::ObjectKinematic => "ObjectKinematic",
            FactorKind::PriorPose => "PriorPose",
            FactorKind::PriorPoint => "PriorPoint",
        }
    }
}

/// Measurement data carried by a factor.
#[derive(Clone, Debug, PartialEq)]
pub enum FactorModel {
    /// Keys: `[X_k, m]`.
    PointMeasurementWorld { measured: Point3 },
    /// Keys: `[X_{k−1}, X_k]`.
    CameraOdometry { measured: Pose },
    /// Keys: `[m_k, m_{k−1}, H]`.
    WorldMotionTernary,
    /// Keys: `[H_{k−2,k−1}, H_{k−1,k}]`.
    MotionSmoothing,
    /// Keys: `[X_k, L_k, m_L]`.
    PointMeasurementObjectCentric { measured: Point3 },
    /// Keys: `[L_k, L_{k−1}, H, m_L]`.
    ObjectCentricMotion,
    /// Keys: `[L_k, L_{k−1}, H]`.
    ObjectKinematic,
    PriorPose { mean: Pose },
    PriorPoint { mean: Point3 },
}

impl FactorModel {
    pub fn kind(&self) -> FactorKind {
        match self {
            FactorModel::PointMeasurementWorld { .. } => FactorKind::PointMeasurementWorld,
            FactorModel::CameraOdometry { .. } => FactorKind::CameraOdometry,
            FactorModel::WorldMotionTernary => FactorKind::WorldMotionTernary,
            FactorModel::MotionSmoothing => FactorKind::MotionSmoothing,
            FactorModel::PointMeasurementObjectCentric { .. } => FactorKind::PointMeasurementObjectCentric,
            FactorModel::ObjectCentricMotion => FactorKind::ObjectCentricMotion,
            FactorModel::ObjectKinematic => FactorKind::ObjectKinematic,
            FactorModel::PriorPose { .. } => FactorKind::PriorPose,
            FactorModel::PriorPoint { .. } => FactorKind::PriorPoint,
        }
    }
}

/// A residual over an ordered tuple of variables with a diagonal noise model.
#[derive(Clone, Debug, PartialEq)]
pub struct Factor {
    keys: Vec<VariableKey>,
    model: FactorModel,
    noise: NoiseModel,
}

impl Factor {
    /// Creates a factor, checking arity, key types and noise dimension.
    pub fn new(model: FactorModel, keys: Vec<VariableKey>, noise: NoiseModel) -> Result<Self> {
        let kind = model.kind();
        if keys.len() != kind.arity() {
            return Err(Error::DimensionMismatch { expected: kind.arity(), got: keys.len() });
        }
        if noise.dim() != kind.residual_dim() {
            return Err(Error::InvalidNoise(format!(
                "{} needs {} sigmas, got {}",
                kind.name(),
                kind.residual_dim(),
                noise.dim()
            )));
        }
        let pose_slots: &[bool] = match kind {
            FactorKind::PointMeasurementWorld => &[true, false],
            FactorKind::CameraOdometry | FactorKind::MotionSmoothing => &[true, true],
            FactorKind::WorldMotionTernary => &[false, false, true],
            FactorKind::PointMeasurementObjectCentric => &[true, true, false],
            FactorKind::ObjectCentricMotion => &[true, true, true, false],
            FactorKind::ObjectKinematic => &[true, true, true],
            FactorKind::PriorPose => &[true],
            FactorKind::PriorPoint => &[false],
        };
        for (key, &is_pose) in keys.iter().zip(pose_slots) {
            if key.is_pose() != is_pose {
                let expected = if is_pose { "pose" } else { "point" };
                return Err(Error::WrongVariableType { key: *key, expected });
            }
        }
        Ok(Factor { keys, model, noise })
    }

    pub fn point_measurement(camera: VariableKey, point: VariableKey, measured: Point3, noise: NoiseModel) -> Result<Self> {
        Self::new(FactorModel::PointMeasurementWorld { measured }, vec![camera, point], noise)
    }

    pub fn odometry(prev: VariableKey, next: VariableKey, measured: Pose, noise: NoiseModel) -> Result<Self> {
        Self::new(FactorModel::CameraOdometry { measured }, vec![prev, next], noise)
    }

    pub fn world_motion_ternary(
        point: VariableKey,
        prev_point: VariableKey,
        motion: VariableKey,
        noise: NoiseModel,
    ) -> Result<Self> {
        Self::new(FactorModel::WorldMotionTernary, vec![point, prev_point, motion], noise)
    }

    pub fn motion_smoothing(first: VariableKey, second: VariableKey, noise: NoiseModel) -> Result<Self> {
        Self::new(FactorModel::MotionSmoothing, vec![first, second], noise)
    }

    pub fn object_point_measurement(
        camera: VariableKey,
        object: VariableKey,
        local: VariableKey,
        measured: Point3,
        noise: NoiseModel,
    ) -> Result<Self> {
        Self::new(
            FactorModel::PointMeasurementObjectCentric { measured },
            vec![camera, object, local],
            noise,
        )
    }

    pub fn object_centric_motion(
        object: VariableKey,
        prev_object: VariableKey,
        motion: VariableKey,
        local: VariableKey,
        noise: NoiseModel,
    ) -> Result<Self> {
        Self::new(FactorModel::ObjectCentricMotion, vec![object, prev_object, motion, local], noise)
    }

    pub fn object_kinematic(
        object: VariableKey,
        prev_object: VariableKey,
        motion: VariableKey,
        noise: NoiseModel,
    ) -> Result<Self> {
        Self::new(FactorModel::ObjectKinematic, vec![object, prev_object, motion], noise)
    }

    pub fn prior_pose(key: VariableKey, mean: Pose, noise: NoiseModel) -> Result<Self> {
        Self::new(FactorModel::PriorPose { mean }, vec![key], noise)
    }

    pub fn prior_point(key: VariableKey, mean: Point3, noise: NoiseModel) -> Result<Self> {
        Self::new(FactorModel::PriorPoint { mean }, vec![key], noise)
    }

    pub fn keys(&self) -> &[VariableKey] {
        &self.keys
    }

    pub fn model(&self) -> &FactorModel {
        &self.model
    }

    pub fn kind(&self) -> FactorKind {
        self.model.kind()
    }

    pub fn noise(&self) -> &NoiseModel {
        &self.noise
    }

    fn pose<'a>(&self, values: &'a Values, slot: usize) -> Result<&'a Pose> {
        values.pose(&self.keys[slot])
    }

    fn point<'a>(&self, values: &'a Values, slot: usize) -> Result<&'a Point3> {
        values.point(&self.keys[slot])
    }

    /// Unwhitened residual.
    pub fn error(&self, values: &Values) -> Result<DVector<f64>> {
        let r = match &self.model {
            FactorModel::PointMeasurementWorld { measured } => {
                dvec3(point_measurement_residual(self.pose(values, 0)?, self.point(values, 1)?, measured))
            }
            FactorModel::CameraOdometry { measured } => {
                dvec6(odometry_residual(self.pose(values, 0)?, self.pose(values, 1)?, measured)?)
            }
            FactorModel::WorldMotionTernary => dvec3(world_motion_ternary_residual(
                self.point(values, 0)?,
                self.point(values, 1)?,
                self.pose(values, 2)?,
            )),
            FactorModel::MotionSmoothing => {
                dvec6(motion_smoothing_residual(self.pose(values, 0)?, self.pose(values, 1)?)?)
            }
            FactorModel::PointMeasurementObjectCentric { measured } => dvec3(object_centric_point_residual(
                self.pose(values, 0)?,
                self.pose(values, 1)?,
                self.point(values, 2)?,
                measured,
            )),
            FactorModel::ObjectCentricMotion => dvec3(object_centric_motion_residual(
                self.pose(values, 0)?,
                self.pose(values, 1)?,
                self.pose(values, 2)?,
                self.point(values, 3)?,
            )),
            FactorModel::ObjectKinematic => dvec6(object_kinematic_residual(
                self.pose(values, 0)?,
                self.pose(values, 1)?,
                self.pose(values, 2)?,
            )?),
            FactorModel::PriorPose { mean } => dvec6(prior_pose_residual(self.pose(values, 0)?, mean)?),
            FactorModel::PriorPoint { mean } => dvec3(prior_point_residual(self.point(values, 0)?, mean)),
        };
        Ok(r)
    }

    pub fn whitened_error(&self, values: &Values) -> Result<DVector<f64>> {
        let mut r = self.error(values)?;
        self.noise.whiten(&mut r);
        Ok(r)
    }

    /// Unwhitened residual and analytic Jacobian blocks, one per key.
    pub fn linearize(&self, values: &Values) -> Result<(DVector<f64>, Vec<DMatrix<f64>>)> {
        let out = match &self.model {
            FactorModel::PointMeasurementWorld { measured } => {
                let (x, m) = (self.pose(values, 0)?, self.point(values, 1)?);
                let r = point_measurement_residual(x, m, measured);
                let jx = -inverse_transformed_point_jacobian(x, m);
                let jm = -x.rotation().transpose();
                (dvec3(r), vec![dmat(&jx), dmat(&jm)])
            }
            FactorModel::CameraOdometry { measured } => {
                let (prev, next) = (self.pose(values, 0)?, self.pose(values, 1)?);
                let r = odometry_residual(prev, next, measured)?;
                let j_prev = se3_right_jacobian_inv(&r) * measured.inverse().adjoint();
                let j_next = -se3_left_jacobian_inv(&r);
                (dvec6(r), vec![dmat(&j_prev), dmat(&j_next)])
            }
            FactorModel::WorldMotionTernary => {
                let (m, m_prev, h) = (self.point(values, 0)?, self.point(values, 1)?, self.pose(values, 2)?);
                let r = world_motion_ternary_residual(m, m_prev, h);
                let jh = -transformed_point_jacobian(h, m_prev);
                (dvec3(r), vec![dmat(&Matrix3::identity()), dmat(&-h.rotation()), dmat(&jh)])
            }
            FactorModel::MotionSmoothing => {
                let (a, b) = (self.pose(values, 0)?, self.pose(values, 1)?);
                let r = motion_smoothing_residual(a, b)?;
                let ja = -se3_left_jacobian_inv(&r);
                let jb = se3_right_jacobian_inv(&r);
                (dvec6(r), vec![dmat(&ja), dmat(&jb)])
            }
            FactorModel::PointMeasurementObjectCentric { measured } => {
                let (x, l, m) = (self.pose(values, 0)?, self.pose(values, 1)?, self.point(values, 2)?);
                let r = object_centric_point_residual(x, l, m, measured);
                let world = l.transform_point(m);
                let jx = -inverse_transformed_point_jacobian(x, &world);
                let rxt = x.rotation().transpose();
                let jl = -rxt * transformed_point_jacobian(l, m);
                let jm = -rxt * l.rotation();
                (dvec3(r), vec![dmat(&jx), dmat(&jl), dmat(&jm)])
            }
            FactorModel::ObjectCentricMotion => {
                let (l, l_prev, h, m) = (
                    self.pose(values, 0)?,
                    self.pose(values, 1)?,
                    self.pose(values, 2)?,
                    self.point(values, 3)?,
                );
                let r = object_centric_motion_residual(l, l_prev, h, m);
                let predicted = h.compose(l_prev);
                let jl = transformed_point_jacobian(l, m);
                let jl_prev = -transformed_point_jacobian(&predicted, m);
                let jh = -transformed_point_jacobian(h, &l_prev.transform_point(m));
                let jm = l.rotation() - predicted.rotation();
                (dvec3(r), vec![dmat(&jl), dmat(&jl_prev), dmat(&jh), dmat(&jm)])
            }
            FactorModel::ObjectKinematic => {
                let (l, l_prev, h) = (self.pose(values, 0)?, self.pose(values, 1)?, self.pose(values, 2)?);
                let r = object_kinematic_residual(l, l_prev, h)?;
                let jr_inv = se3_right_jacobian_inv(&r);
                let jl = -se3_left_jacobian_inv(&r);
                let jh = jr_inv * l_prev.inverse().adjoint();
                (dvec6(r), vec![dmat(&jl), dmat(&jr_inv), dmat(&jh)])
            }
            FactorModel::PriorPose { mean } => {
                let p = self.pose(values, 0)?;
                let r = prior_pose_residual(p, mean)?;
                let j: Matrix6<f64> = -se3_left_jacobian_inv(&r);
                (dvec6(r), vec![dmat(&j)])
            }
            FactorModel::PriorPoint { mean } => {
                let r = prior_point_residual(self.point(values, 0)?, mean);
                (dvec3(r), vec![dmat(&-Matrix3::identity())])
            }
        };
        Ok(out)
    }
}

fn dvec3(v: Vector3<f64>) -> DVector<f64> {
    DVector::from_column_slice(v.as_slice())
}

fn dvec6(v: Twist) -> DVector<f64> {
    DVector::from_column_slice(v.as_slice())
}

fn dmat<const R: usize, const C: usize>(m: &SMatrix<f64, R, C>) -> DMatrix<f64> {
    DMatrix::from_column_slice(R, C, m.as_slice())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn assert_vec(got: &[f64], expected: &[f64], tol: f64) {
        assert_eq!(got.len(), expected.len());
        for (g, e) in got.iter().zip(expected) {
            assert!((g - e).abs() < tol, "{got:?} vs {expected:?}");
        }
    }

    fn tr(x: f64, y: f64, z: f64) -> Pose {
        Pose::from_translation(x, y, z)
    }

    #[test]
    fn point_measurement_examples() {
        let m = Point3::new(1.0, 2.0, 3.0);
        assert_vec(point_measurement_residual(&Pose::identity(), &m, &m).as_slice(), &[0.0; 3], 1e-15);
        let r = point_measurement_residual(&tr(1.0, 0.0, 0.0), &m, &Point3::new(0.0, 2.0, 3.0));
        assert_vec(r.as_slice(), &[0.0; 3], 1e-15);
        let r = point_measurement_residual(&Pose::identity(), &m, &Point3::new(1.0, 2.0, 4.0));
        assert_vec(r.as_slice(), &[0.0, 0.0, 1.0], 1e-15);
    }

    #[test]
    fn odometry_examples() {
        let id = Pose::identity();
        assert_vec(odometry_residual(&id, &id, &id).unwrap().as_slice(), &[0.0; 6], 1e-15);
        let t = tr(1.0, 0.0, 0.0);
        assert_vec(odometry_residual(&id, &t, &t).unwrap().as_slice(), &[0.0; 6], 1e-15);
        assert_vec(
            odometry_residual(&id, &id, &t).unwrap().as_slice(),
            &[0.0, 0.0, 0.0, 1.0, 0.0, 0.0],
            1e-15,
        );
    }

    #[test]
    fn ternary_examples() {
        let p = Point3::new(1.0, 1.0, 1.0);
        assert_vec(world_motion_ternary_residual(&p, &p, &Pose::identity()).as_slice(), &[0.0; 3], 1e-15);
        let h = Pose::new(Pose::rot_z(FRAC_PI_2).quaternion(), Vector3::new(1.0, -1.0, 0.0));
        let r = world_motion_ternary_residual(&Point3::new(1.0, 1.0, 0.0), &Point3::new(2.0, 0.0, 0.0), &h);
        assert_vec(r.as_slice(), &[0.0; 3], 1e-15);
        let o = Point3::origin();
        assert_vec(world_motion_ternary_residual(&o, &o, &tr(0.0, 1.0, 0.0)).as_slice(), &[0.0, -1.0, 0.0], 1e-15);
    }

    #[test]
    fn smoothing_examples() {
        let h = Pose::exp(&Twist::new(0.1, 0.2, -0.1, 1.0, 0.0, 2.0));
        assert_vec(motion_smoothing_residual(&h, &h).unwrap().as_slice(), &[0.0; 6], 1e-15);
        assert_vec(
            motion_smoothing_residual(&Pose::identity(), &tr(0.1, 0.0, 0.0)).unwrap().as_slice(),
            &[0.0, 0.0, 0.0, 0.1, 0.0, 0.0],
            1e-15,
        );
        let r = motion_smoothing_residual(&Pose::rot_z(10f64.to_radians()), &Pose::rot_z(12f64.to_radians())).unwrap();
        assert_vec(r.as_slice(), &[0.0, 0.0, 2f64.to_radians(), 0.0, 0.0, 0.0], 1e-14);
    }

    #[test]
    fn object_point_examples() {
        let m = Point3::new(1.0, 0.0, 0.0);
        let id = Pose::identity();
        assert_vec(object_centric_point_residual(&id, &id, &m, &m).as_slice(), &[0.0; 3], 1e-15);
        let l = tr(0.0, 5.0, 0.0);
        let r = object_centric_point_residual(&id, &l, &m, &Point3::new(1.0, 5.0, 0.0));
        assert_vec(r.as_slice(), &[0.0; 3], 1e-15);
        let r = object_centric_point_residual(&tr(0.0, 0.0, 1.0), &l, &m, &Point3::new(1.0, 5.0, -1.0));
        assert_vec(r.as_slice(), &[0.0; 3], 1e-15);
    }

    #[test]
    fn object_centric_motion_examples() {
        let id = Pose::identity();
        let m = Point3::new(0.3, -2.0, 1.0);
        assert_vec(object_centric_motion_residual(&id, &id, &id, &m).as_slice(), &[0.0; 3], 1e-15);
        let r = object_centric_motion_residual(&tr(1.0, 0.0, 0.0), &id, &id, &Point3::origin());
        assert_vec(r.as_slice(), &[1.0, 0.0, 0.0], 1e-15);
        let h = Pose::exp(&Twist::new(0.3, -0.2, 0.5, 1.0, 2.0, -3.0));
        let l_prev = Pose::exp(&Twist::new(-0.4, 0.1, 0.2, -1.0, 0.5, 4.0));
        let r = object_centric_motion_residual(&h.compose(&l_prev), &l_prev, &h, &m);
        assert_vec(r.as_slice(), &[0.0; 3], 1e-14);
    }

    #[test]
    fn object_kinematic_examples() {
        let h = Pose::exp(&Twist::new(0.3, -0.2, 0.5, 1.0, 2.0, -3.0));
        let l_prev = Pose::exp(&Twist::new(-0.4, 0.1, 0.2, -1.0, 0.5, 4.0));
        let r = object_kinematic_residual(&h.compose(&l_prev), &l_prev, &h).unwrap();
        assert_vec(r.as_slice(), &[0.0; 6], 1e-14);
        let id = Pose::identity();
        let r = object_kinematic_residual(&id, &id, &tr(1.0, 0.0, 0.0)).unwrap();
        assert_vec(r.as_slice(), &[0.0, 0.0, 0.0, 1.0, 0.0, 0.0], 1e-15);
        let rz = Pose::rot_z(FRAC_PI_2);
        assert_vec(object_kinematic_residual(&rz, &id, &rz).unwrap().as_slice(), &[0.0; 6], 1e-15);
    }

    #[test]
    fn constructor_checks_arity_and_types() {
        let n3 = NoiseModel::isotropic(3, 0.1).unwrap();
        let n6 = NoiseModel::twist(0.1, 0.1).unwrap();
        assert!(Factor::point_measurement(
            VariableKey::CameraPose(0),
            VariableKey::StaticPoint(0),
            Point3::origin(),
            n3.clone()
        )
        .is_ok());
        assert!(Factor::point_measurement(
            VariableKey::StaticPoint(0),
            VariableKey::CameraPose(0),
            Point3::origin(),
            n3.clone()
        )
        .is_err());
        assert!(Factor::prior_pose(VariableKey::CameraPose(0), Pose::identity(), n3).is_err());
        assert!(Factor::new(FactorModel::ObjectKinematic, vec![VariableKey::CameraPose(0)], n6).is_err());
    }
}
