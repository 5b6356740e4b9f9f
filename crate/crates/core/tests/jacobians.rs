//! Analytic Jacobians of every factor kind against central differences.

mod common;

use dynslam::factors::Factor;
use dynslam::graph::{numerical_jacobian, NoiseModel, Values, VariableKey};
use dynslam::FactorKind;
use rand_chacha::ChaCha8Rng;

const SAMPLES: usize = 100;
const TOLERANCE: f64 = 1e-5;

/// A factor of `kind` with random measurement data and random values for its keys.
fn random_instance(kind: FactorKind, rng: &mut ChaCha8Rng) -> (Factor, Values) {
    use VariableKey::*;
    let iso3 = NoiseModel::isotropic(3, 0.1).unwrap();
    let tw = NoiseModel::twist(0.05, 0.1).unwrap();
    let factor = match kind {
        FactorKind::PointMeasurementWorld => {
            Factor::point_measurement(CameraPose(0), StaticPoint(0), common::point(rng), iso3).unwrap()
        }
        FactorKind::CameraOdometry => Factor::odometry(CameraPose(0), CameraPose(1), common::pose(rng), tw).unwrap(),
        FactorKind::WorldMotionTernary => {
            Factor::world_motion_ternary(DynamicPointWorld(0, 1), DynamicPointWorld(0, 0), ObjectMotion(1, 1), iso3)
                .unwrap()
        }
        FactorKind::MotionSmoothing => Factor::motion_smoothing(ObjectMotion(1, 1), ObjectMotion(1, 2), tw).unwrap(),
        FactorKind::PointMeasurementObjectCentric => Factor::object_point_measurement(
            CameraPose(0),
            ObjectPose(1, 0),
            DynamicPointLocal(0, 1),
            common::point(rng),
            iso3,
        )
        .unwrap(),
        FactorKind::ObjectCentricMotion => {
            Factor::object_centric_motion(ObjectPose(1, 1), ObjectPose(1, 0), ObjectMotion(1, 1), DynamicPointLocal(0, 1), iso3)
                .unwrap()
        }
        FactorKind::ObjectKinematic => {
            Factor::object_kinematic(ObjectPose(1, 1), ObjectPose(1, 0), ObjectMotion(1, 1), tw).unwrap()
        }
        FactorKind::PriorPose => Factor::prior_pose(CameraPose(0), common::pose(rng), tw).unwrap(),
        FactorKind::PriorPoint => Factor::prior_point(StaticPoint(0), common::point(rng), iso3).unwrap(),
    };
    let mut values = Values::new();
    for key in factor.keys() {
        if key.is_pose() {
            values.insert_pose(*key, common::pose(rng));
        } else {
            values.insert_point(*key, common::point(rng));
        }
    }
    (factor, values)
}

fn max_relative_error(kind: FactorKind, seed: u64) -> f64 {
    let mut rng = common::rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..SAMPLES {
        let (factor, values) = random_instance(kind, &mut rng);
        let (_, analytic) = factor.linearize(&values).unwrap();
        let numeric = numerical_jacobian(&factor, &values).unwrap();
        assert_eq!(analytic.len(), factor.keys().len());
        for ((a, n), key) in analytic.iter().zip(&numeric).zip(factor.keys()) {
            assert_eq!(a.shape(), (kind.residual_dim(), key.tangent_dim()));
            let scale = n.amax().max(1.0);
            worst = worst.max((a - n).amax() / scale);
        }
    }
    worst
}

#[test]
fn every_factor_kind_matches_finite_differences() {
    for (n, kind) in FactorKind::ALL.into_iter().enumerate() {
        let err = max_relative_error(kind, 100 + n as u64);
        assert!(err < TOLERANCE, "{}: max relative error {err:e}", kind.name());
    }
}

#[test]
fn whitened_jacobians_scale_by_sigma() {
    let mut rng = common::rng(7);
    let (factor, values) = random_instance(FactorKind::CameraOdometry, &mut rng);
    let graph: dynslam::FactorGraph = [factor.clone()].into_iter().collect();
    let system = dynslam::graph::linearize(&graph, &values).unwrap();
    let (_, raw) = factor.linearize(&values).unwrap();
    let sigmas = factor.noise().sigmas();
    for (w, r) in system.factors[0].jacobians.iter().zip(&raw) {
        for row in 0..6 {
            for col in 0..6 {
                assert!((w[(row, col)] * sigmas[row] - r[(row, col)]).abs() < 1e-12);
            }
        }
    }
}
