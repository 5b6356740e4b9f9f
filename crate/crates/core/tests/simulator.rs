//! Scene generation: determinism, ground-truth consistency and noise statistics.

mod common;

use dynslam::graph::{Values, VariableKey};
use dynslam::io::serialize_dataset;
use dynslam::se3::Pose;
use dynslam::sim::{generate, perturb_values, ObjectSpec, SceneConfig, SceneNoise};

#[test]
fn fixed_seed_is_bit_identical() {
    let c = SceneConfig { seed: 42, ..Default::default() };
    assert_eq!(serialize_dataset(&generate(&c).unwrap()), serialize_dataset(&generate(&c).unwrap()));
    let other = SceneConfig { seed: 43, ..Default::default() };
    assert_ne!(serialize_dataset(&generate(&c).unwrap()), serialize_dataset(&generate(&other).unwrap()));
}

#[test]
fn ground_truth_obeys_rigid_kinematics() {
    let d = generate(&SceneConfig::default()).unwrap();
    let gt = &d.ground_truth;
    for (&(j, kp, k), h) in &gt.motions {
        assert!(h.max_abs_diff(&(gt.objects[&(j, k)] * gt.objects[&(j, kp)].inverse())) < 1e-12);
    }
    for (i, track) in d.dynamic_tracks() {
        for w in track.observations.windows(2) {
            let (kp, k) = (w[0].0, w[1].0);
            let h = gt.motions[&(track.object, kp, k)];
            assert!((h.transform_point(&gt.points[&(i, kp)]) - gt.points[&(i, k)]).amax() < 1e-12);
        }
    }
}

#[test]
fn zero_noise_measurements_are_exact() {
    let d = generate(&common::zero_noise_default()).unwrap();
    let gt = &d.ground_truth;
    for (&(i, j, k), z) in &d.dynamic_meas {
        let _ = j;
        assert!((gt.cameras[&k].inverse_transform_point(&gt.points[&(i, k)]) - z).amax() < 1e-12);
    }
    for (&(kp, k), t) in &d.odometry {
        assert!(t.max_abs_diff(&gt.cameras[&kp].between(&gt.cameras[&k])) < 1e-12);
    }
    for (key, h) in &d.motion_init {
        assert!(h.max_abs_diff(&gt.motions[key]) < 1e-12);
    }
}

#[test]
fn pure_translation_twist_gives_constant_world_motion() {
    let c = SceneConfig {
        objects: vec![ObjectSpec { translation: [0.0; 3], twist: [0.0, 0.0, 0.0, 1.0, 0.0, 0.0], ..Default::default() }],
        noise: SceneNoise::zero(),
        ..Default::default()
    };
    let d = generate(&c).unwrap();
    for h in d.ground_truth.motions.values() {
        assert!(h.max_abs_diff(&Pose::from_translation(1.0, 0.0, 0.0)) < 1e-12);
    }
}

#[test]
fn measurement_noise_has_configured_sigma() {
    let c = SceneConfig { seed: 9, ..Default::default() };
    let d = generate(&c).unwrap();
    let gt = &d.ground_truth;
    let mut sum_sq = 0.0;
    let mut n = 0;
    for (&(i, k), z) in &d.static_meas {
        let truth = gt.cameras[&k].inverse_transform_point(&gt.points[&(i, 0)]);
        sum_sq += (z - truth).norm_squared();
        n += 3;
    }
    let sigma = (sum_sq / n as f64).sqrt();
    assert!((sigma / c.noise.measurement - 1.0).abs() < 0.05, "sigma {sigma}");
}

#[test]
fn zero_perturbation_is_identity() {
    let d = generate(&SceneConfig::default()).unwrap();
    let p = dynslam::builders::build(&d, dynslam::builders::Formulation::WorldCentric, &Default::default()).unwrap();
    assert_eq!(perturb_values(&p.initial, 0.0, 0.0, 0.0, 5).unwrap(), p.initial);
}

#[test]
fn point_perturbation_sigma_within_five_percent() {
    let mut v = Values::new();
    for i in 0..10_000 {
        v.insert_point(VariableKey::StaticPoint(i), dynslam::Point3::origin());
    }
    let out = perturb_values(&v, 0.0, 0.0, 0.1, 11).unwrap();
    for axis in 0..3 {
        let xs: Vec<f64> = out.iter().map(|(k, _)| out.point(k).unwrap()[axis]).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
        assert!((var.sqrt() / 0.1 - 1.0).abs() < 0.05, "axis {axis}: {}", var.sqrt());
    }
}

#[test]
fn pose_perturbation_norm_follows_chi_six() {
    // With unit sigmas the twist norm is chi-distributed with 6 degrees of
    // freedom: mean √2·Γ(3.5)/Γ(3) = 15√π/16·√2 ≈ 2.349964.
    let chi6_mean = 15.0 * std::f64::consts::PI.sqrt() / 16.0 * std::f64::consts::SQRT_2;
    let sigma = 0.01;
    let mut v = Values::new();
    for k in 0..20_000 {
        v.insert_pose(VariableKey::CameraPose(k), Pose::identity());
    }
    let out = perturb_values(&v, sigma, sigma, 0.0, 12).unwrap();
    let norms: Vec<f64> = out.iter().map(|(k, _)| out.pose(k).unwrap().log().unwrap().norm() / sigma).collect();
    let mean = norms.iter().sum::<f64>() / norms.len() as f64;
    assert!((mean / chi6_mean - 1.0).abs() < 0.02, "mean {mean} vs {chi6_mean}");
    let second = norms.iter().map(|x| x * x).sum::<f64>() / norms.len() as f64;
    assert!((second / 6.0 - 1.0).abs() < 0.03, "E[|ξ|²] {second}");
}

#[test]
fn tracklets_never_change_object() {
    let d = generate(&SceneConfig::default()).unwrap();
    d.validate().unwrap();
    let statics: std::collections::BTreeSet<_> = d.static_meas.keys().map(|(i, _)| *i).collect();
    for (i, t) in d.dynamic_tracks() {
        assert!(!statics.contains(&i));
        assert_eq!(t.observations.len(), 20);
    }
}
