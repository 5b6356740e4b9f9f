//! Graph topology and initialization of the four formulations.

mod common;

use dynslam::builders::{
    build, ground_truth_values, BuildOptions, FactorRole, Formulation, ObjectPriorMode,
};
use dynslam::sim::generate;
use dynslam::Error;

fn counts(f: Formulation, statics: usize) -> dynslam::builders::Manifest {
    let d = generate(&common::toy_config(3, statics, 1)).unwrap();
    build(&d, f, &BuildOptions::default()).unwrap().manifest
}

#[test]
fn world_centric_small_scene_topology() {
    // 3 steps, 3 static points seen at every step, 1 dynamic point.
    let m = counts(Formulation::WorldCentric, 3);
    assert_eq!(m.variable_count("CameraPose"), 3);
    assert_eq!(m.variable_count("StaticPoint"), 3);
    assert_eq!(m.variable_count("DynamicPointWorld"), 3);
    assert_eq!(m.variable_count("ObjectMotion"), 2);
    assert_eq!(m.total_variables(), 11);
    assert_eq!(m.factor_count(FactorRole::CameraPrior), 1);
    assert_eq!(m.factor_count(FactorRole::Odometry), 2);
    assert_eq!(m.factor_count(FactorRole::StaticMeasurement), 9);
    assert_eq!(m.factor_count(FactorRole::DynamicMeasurement), 3);
    assert_eq!(m.factor_count(FactorRole::TernaryMotion), 2);
    assert_eq!(m.factor_count(FactorRole::Smoothing), 1);
    assert_eq!(m.total_factors(), 18);
}

#[test]
fn object_centric_small_scene_topology() {
    let base = counts(Formulation::ObjectCentricBase, 3);
    assert_eq!(base.variable_count("CameraPose"), 3);
    assert_eq!(base.variable_count("StaticPoint"), 3);
    assert_eq!(base.variable_count("DynamicPointLocal"), 1);
    assert_eq!(base.variable_count("ObjectPose"), 3);
    assert_eq!(base.variable_count("ObjectMotion"), 2);
    assert_eq!(base.factor_count(FactorRole::CameraPrior), 1);
    assert_eq!(base.factor_count(FactorRole::ObjectPrior), 1);
    assert_eq!(base.factor_count(FactorRole::Odometry), 2);
    assert_eq!(base.factor_count(FactorRole::StaticMeasurement), 9);
    assert_eq!(base.factor_count(FactorRole::DynamicMeasurement), 3);
    assert_eq!(base.factor_count(FactorRole::ObjectCentricMotion), 2);
    assert_eq!(base.factor_count(FactorRole::ObjectKinematic), 0);
    assert_eq!(base.factor_count(FactorRole::Smoothing), 1);

    let okf = counts(Formulation::ObjectCentricWithOKF, 3);
    assert_eq!(okf.factor_count(FactorRole::ObjectKinematic), 2);
    assert_eq!(okf.factor_count(FactorRole::ObjectCentricMotion), 2);
    assert_eq!(okf.total_factors(), base.total_factors() + 2);

    let only = counts(Formulation::ObjectCentricOnlyOKF, 3);
    assert_eq!(only.factor_count(FactorRole::ObjectKinematic), 2);
    assert_eq!(only.factor_count(FactorRole::ObjectCentricMotion), 0);
}

#[test]
fn two_step_single_point_counts() {
    let d = generate(&common::toy_config(2, 0, 1)).unwrap();
    let m = build(&d, Formulation::WorldCentric, &BuildOptions::default()).unwrap().manifest;
    assert_eq!(m.variable_count("CameraPose"), 2);
    assert_eq!(m.variable_count("DynamicPointWorld"), 2);
    assert_eq!(m.variable_count("ObjectMotion"), 1);
    assert_eq!(m.factor_count(FactorRole::TernaryMotion), 1);
    assert_eq!(m.factor_count(FactorRole::Smoothing), 0);
}

#[test]
fn single_step_dataset_is_rejected() {
    let mut d = generate(&common::toy_config(2, 2, 2)).unwrap();
    d.camera_init.remove(&1);
    d.odometry.clear();
    d.motion_init.clear();
    d.static_meas.retain(|&(_, k), _| k == 0);
    d.dynamic_meas.retain(|&(_, _, k), _| k == 0);
    for f in Formulation::ALL {
        assert!(matches!(build(&d, f, &BuildOptions::default()), Err(Error::Dataset(_))), "{f}");
    }
}

#[test]
fn missing_motion_init_is_a_dataset_error() {
    let mut d = generate(&common::toy_config(3, 2, 2)).unwrap();
    d.motion_init.remove(&(1, 1, 2));
    assert!(matches!(build(&d, Formulation::WorldCentric, &BuildOptions::default()), Err(Error::Dataset(_))));
}

#[test]
fn counting_formulas_on_the_default_scene() {
    let d = generate(&common::zero_noise_default()).unwrap();
    let tracklets = d.dynamic_tracks().len();
    let observations = d.dynamic_meas.len();
    for f in Formulation::ALL {
        let p = build(&d, f, &BuildOptions::default()).unwrap();
        let m = &p.manifest;
        assert_eq!(m.total_variables(), p.initial.len());
        if f.is_object_centric() {
            assert_eq!(m.variable_count("DynamicPointLocal"), tracklets);
            assert_eq!(m.variable_count("DynamicPointWorld"), 0);
            assert_eq!(m.factor_count(FactorRole::ObjectPrior), 3);
        } else {
            assert_eq!(m.variable_count("DynamicPointWorld"), observations);
            assert_eq!(m.variable_count("DynamicPointLocal"), 0);
        }
        for factor in p.graph.factors() {
            for key in factor.keys() {
                assert!(p.initial.contains(key), "{f}: {key} not initialized");
            }
        }
    }
}

#[test]
fn shared_subgraphs_are_identical() {
    let d = generate(&dynslam::sim::SceneConfig::default()).unwrap();
    let common_roles = [FactorRole::CameraPrior, FactorRole::Odometry, FactorRole::StaticMeasurement, FactorRole::Smoothing];
    let shared = |f: Formulation| {
        let p = build(&d, f, &BuildOptions::default()).unwrap();
        p.graph
            .factors()
            .iter()
            .zip(&p.roles)
            .filter(|(_, r)| common_roles.contains(r))
            .map(|(f, r)| (*r, f.keys().to_vec(), format!("{:?}", f.model()), f.noise().clone()))
            .collect::<Vec<_>>()
    };
    let reference = shared(Formulation::WorldCentric);
    assert!(!reference.is_empty());
    for f in Formulation::ALL {
        assert_eq!(shared(f), reference, "{f}");
    }
}

#[test]
fn zero_noise_ground_truth_has_zero_chi2() {
    let d = generate(&common::zero_noise_default()).unwrap();
    let options = BuildOptions { object_prior: ObjectPriorMode::GroundTruth, ..Default::default() };
    for f in Formulation::ALL {
        let p = build(&d, f, &options).unwrap();
        let gt = ground_truth_values(&d, &p).unwrap();
        let chi2 = p.graph.chi2(&gt).unwrap();
        assert!(chi2 < 1e-10, "{f}: chi2 {chi2:e}");
        for factor in p.graph.factors() {
            assert!(factor.error(&gt).unwrap().norm() < 1e-9);
        }
    }
}

#[test]
fn object_poses_start_at_centroids() {
    let d = generate(&common::toy_config(3, 0, 4)).unwrap();
    let p = build(&d, Formulation::ObjectCentricBase, &BuildOptions::default()).unwrap();
    for k in 0..3 {
        let l = p.initial.pose(&dynslam::VariableKey::ObjectPose(1, k)).unwrap();
        let x = d.camera_init[&k];
        let pts: Vec<_> = d.object_observations(1, k).iter().map(|(_, z)| x.transform_point(z)).collect();
        let centroid = dynslam::builders::centroid_init(&pts).unwrap();
        assert!(l.max_abs_diff(&centroid) < 1e-12);
        assert_eq!(l.quaternion(), nalgebra::UnitQuaternion::identity());
    }
}

#[test]
fn single_observation_tracklets_are_flagged() {
    let mut d = generate(&common::toy_config(3, 1, 3)).unwrap();
    let lone = *d.dynamic_tracks().keys().last().unwrap();
    d.dynamic_meas.retain(|&(i, _, k), _| i != lone || k == 2);
    let p = build(&d, Formulation::WorldCentric, &BuildOptions::default()).unwrap();
    assert_eq!(p.manifest.single_observation_tracklets, vec![lone]);
    assert!(p.initial.contains(&dynslam::VariableKey::DynamicPointWorld(lone, 2)));
    let p = build(&d, Formulation::ObjectCentricBase, &BuildOptions::default()).unwrap();
    assert_eq!(p.manifest.single_observation_tracklets, vec![lone]);
}
