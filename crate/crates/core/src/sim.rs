//! Synthetic dynamic scenes standing in for a visual front-end.
//!
//! Frames follow the robotics convention (x forward, z up). Static tracklets
//! get ids `0..static_points`, dynamic tracklets follow object by object; object
//! ids start at 1. Every point is visible at every step.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::{GroundTruth, SceneDataset};
use crate::error::{Error, Result};
use crate::graph::{Values, Variable};
use crate::se3::{Point3, Pose, Twist};

/// RNG sub-stream of the scene geometry and front-end noise.
pub const SCENE_STREAM: u64 = 1;
/// RNG sub-stream of [`perturb_values`].
pub const PERTURBATION_STREAM: u64 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PathKind {
    Straight,
    Arc,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraPath {
    pub kind: PathKind,
    /// Forward distance per step (m).
    pub speed: f64,
    /// Yaw change per step for arcs (rad).
    pub turn_rate: f64,
}

impl Default for CameraPath {
    fn default() -> Self {
        CameraPath { kind: PathKind::Straight, speed: 0.5, turn_rate: 0.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObjectSpec {
    /// Initial position of the object frame (m).
    pub translation: [f64; 3],
    /// Initial orientation as an axis-angle vector (rad).
    pub rotation: [f64; 3],
    /// Body-frame motion per step, `[ω | v]`.
    pub twist: [f64; 6],
    /// Added to the twist once per step, so step `k` uses `twist + (k−1)·ramp`.
    pub twist_ramp: [f64; 6],
    pub points: usize,
    /// Points are drawn uniformly inside a ball of this radius (m).
    pub radius: f64,
}

impl Default for ObjectSpec {
    fn default() -> Self {
        ObjectSpec {
            translation: [10.0, 0.0, 0.5],
            rotation: [0.0; 3],
            twist: [0.0, 0.0, 0.0, 0.5, 0.0, 0.0],
            twist_ramp: [0.0; 6],
            points: 25,
            radius: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Volume {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Default for Volume {
    fn default() -> Self {
        Volume { min: [-5.0, -15.0, -2.0], max: [25.0, 15.0, 5.0] }
    }
}

/// Standard deviations of the simulated front-end.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneNoise {
    /// Per-axis measurement noise (m).
    pub measurement: f64,
    pub odometry_rot: f64,
    pub odometry_trans: f64,
    /// Noise of the initial object-motion estimates.
    pub motion_rot: f64,
    pub motion_trans: f64,
}

impl Default for SceneNoise {
    fn default() -> Self {
        SceneNoise { measurement: 0.05, odometry_rot: 0.01, odometry_trans: 0.02, motion_rot: 0.02, motion_trans: 0.1 }
    }
}

impl SceneNoise {
    pub fn zero() -> Self {
        SceneNoise { measurement: 0.0, odometry_rot: 0.0, odometry_trans: 0.0, motion_rot: 0.0, motion_trans: 0.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneConfig {
    /// Number of time-steps `K`.
    pub steps: usize,
    pub seed: u64,
    pub camera: CameraPath,
    pub objects: Vec<ObjectSpec>,
    pub static_points: usize,
    pub static_volume: Volume,
    pub noise: SceneNoise,
}

impl Default for SceneConfig {
    fn default() -> Self {
        use std::f64::consts::FRAC_PI_2;
        SceneConfig {
            steps: 20,
            seed: 0,
            camera: CameraPath::default(),
            objects: vec![
                ObjectSpec {
                    translation: [10.0, 4.0, 0.5],
                    twist: [0.0, 0.0, 0.05, 0.5, 0.0, 0.0],
                    ..Default::default()
                },
                ObjectSpec {
                    translation: [6.0, -4.0, 0.5],
                    rotation: [0.0, 0.0, FRAC_PI_2],
                    twist: [0.0, 0.0, -0.03, 0.4, 0.0, 0.0],
                    ..Default::default()
                },
                ObjectSpec {
                    translation: [20.0, 0.0, 1.0],
                    rotation: [0.0, 0.0, 3.0],
                    twist: [0.02, 0.0, 0.02, 0.3, 0.0, 0.0],
                    radius: 1.5,
                    ..Default::default()
                },
            ],
            static_points: 150,
            static_volume: Volume::default(),
            noise: SceneNoise::default(),
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        let err = |field: &str, message: &str| Err(Error::Config { field: field.into(), message: message.into() });
        let finite = |xs: &[f64]| xs.iter().all(|x| x.is_finite());
        let sigma_ok = |s: f64| s.is_finite() && s >= 0.0;
        if self.steps < 2 {
            return err("steps", "at least 2 time-steps are required");
        }
        if !finite(&[self.camera.speed, self.camera.turn_rate]) {
            return err("camera", "speed and turn_rate must be finite");
        }
        let v = &self.static_volume;
        if !finite(&v.min) || !finite(&v.max) || v.min.iter().zip(&v.max).any(|(a, b)| a > b) {
            return err("static_volume", "min must not exceed max and bounds must be finite");
        }
        let n = &self.noise;
        for (name, s) in [
            ("noise.measurement", n.measurement),
            ("noise.odometry_rot", n.odometry_rot),
            ("noise.odometry_trans", n.odometry_trans),
            ("noise.motion_rot", n.motion_rot),
            ("noise.motion_trans", n.motion_trans),
        ] {
            if !sigma_ok(s) {
                return err(name, "standard deviations must be finite and non-negative");
            }
        }
        for (idx, o) in self.objects.iter().enumerate() {
            let field = format!("objects[{idx}]");
            if o.points == 0 {
                return err(&field, "needs at least one point");
            }
            if !(o.radius.is_finite() && o.radius > 0.0) {
                return err(&field, "radius must be positive");
            }
            if !finite(&o.translation) || !finite(&o.rotation) || !finite(&o.twist) || !finite(&o.twist_ramp) {
                return err(&field, "pose and twist entries must be finite");
            }
            for k in 1..self.steps {
                if object_twist(o, k).fixed_rows::<3>(0).norm() >= 3.0 {
                    return err(&field, "per-step rotation must stay well below π");
                }
            }
        }
        Ok(())
    }
}

fn object_twist(o: &ObjectSpec, k: usize) -> Twist {
    Twist::from_column_slice(&o.twist) + Twist::from_column_slice(&o.twist_ramp) * (k as f64 - 1.0)
}

fn gaussian_vec3(rng: &mut ChaCha8Rng, sigma: f64) -> Vector3<f64> {
    Vector3::from_fn(|_, _| sigma * rng.sample::<f64, _>(StandardNormal))
}

/// Twist with independent `[σ_rot; 3]` rotational and `[σ_trans; 3]` translational components.
pub fn gaussian_twist(rng: &mut ChaCha8Rng, sigma_rot: f64, sigma_trans: f64) -> Twist {
    let w = gaussian_vec3(rng, sigma_rot);
    let v = gaussian_vec3(rng, sigma_trans);
    Twist::new(w.x, w.y, w.z, v.x, v.y, v.z)
}

fn uniform_in_ball(rng: &mut ChaCha8Rng, radius: f64) -> Vector3<f64> {
    loop {
        let v = Vector3::from_fn(|_, _| rng.random_range(-1.0..=1.0));
        if v.norm_squared() <= 1.0 {
            return v * radius;
        }
    }
}

pub fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Generates a scene with ground truth and noisy front-end output.
pub fn generate(config: &SceneConfig) -> Result<SceneDataset> {
    config.validate()?;
    let mut rng = seeded_rng(config.seed, SCENE_STREAM);
    let k_total = config.steps;
    let noise = &config.noise;

    // Geometry first, then noise, in a fixed order.
    let v = &config.static_volume;
    let static_points: Vec<Point3> = (0..config.static_points)
        .map(|_| Point3::from(Vector3::from_fn(|r, _| rng.random_range(v.min[r]..=v.max[r]))))
        .collect();
    let local_points: Vec<Vec<Point3>> = config
        .objects
        .iter()
        .map(|o| (0..o.points).map(|_| Point3::from(uniform_in_ball(&mut rng, o.radius))).collect())
        .collect();

    let mut gt = GroundTruth::default();
    let turn = match config.camera.kind {
        PathKind::Straight => 0.0,
        PathKind::Arc => config.camera.turn_rate,
    };
    let step_motion = Pose::exp(&Twist::new(0.0, 0.0, turn, config.camera.speed, 0.0, 0.0));
    let mut x = Pose::identity();
    for k in 0..k_total {
        gt.cameras.insert(k, x);
        x = x * step_motion;
    }
    for (idx, o) in config.objects.iter().enumerate() {
        let j = idx + 1;
        let rotation = Vector3::from(o.rotation);
        let mut l = match rotation.try_normalize(0.0) {
            Some(axis) => Pose::from_axis_angle(axis, rotation.norm()),
            None => Pose::identity(),
        };
        l = Pose::new(l.quaternion(), Vector3::from(o.translation));
        gt.objects.insert((j, 0), l);
        for k in 1..k_total {
            let next = l * Pose::exp(&object_twist(o, k));
            gt.motions.insert((j, k - 1, k), next * l.inverse());
            gt.objects.insert((j, k), next);
            l = next;
        }
    }

    let mut data = SceneDataset::default();
    let first_dynamic = config.static_points;
    for k in 0..k_total {
        let x = gt.cameras[&k];
        for (i, m) in static_points.iter().enumerate() {
            let z = x.inverse_transform_point(m) + gaussian_vec3(&mut rng, noise.measurement);
            data.static_meas.insert((i, k), z);
            if k == 0 {
                gt.points.insert((i, 0), *m);
            }
        }
        let mut i = first_dynamic;
        for (idx, points) in local_points.iter().enumerate() {
            let j = idx + 1;
            let l = gt.objects[&(j, k)];
            for m_l in points {
                let m = l.transform_point(m_l);
                let z = x.inverse_transform_point(&m) + gaussian_vec3(&mut rng, noise.measurement);
                data.dynamic_meas.insert((i, j, k), z);
                gt.points.insert((i, k), m);
                i += 1;
            }
        }
    }

    let mut x_init = gt.cameras[&0];
    data.camera_init.insert(0, x_init);
    for k in 1..k_total {
        let truth = gt.cameras[&(k - 1)].between(&gt.cameras[&k]);
        let measured = truth * Pose::exp(&gaussian_twist(&mut rng, noise.odometry_rot, noise.odometry_trans));
        data.odometry.insert((k - 1, k), measured);
        x_init = x_init * measured;
        data.camera_init.insert(k, x_init);
    }
    for (&key, h) in &gt.motions {
        let init = *h * Pose::exp(&gaussian_twist(&mut rng, noise.motion_rot, noise.motion_trans));
        data.motion_init.insert(key, init);
    }
    data.ground_truth = gt;
    Ok(data)
}

/// Right-perturbs every pose by a Gaussian twist and offsets every point by
/// Gaussian noise, visiting keys in order.
pub fn perturb_values(values: &Values, sigma_rot: f64, sigma_trans: f64, sigma_point: f64, seed: u64) -> Result<Values> {
    for (name, s) in [("sigma_rot", sigma_rot), ("sigma_trans", sigma_trans), ("sigma_point", sigma_point)] {
        if !(s.is_finite() && s >= 0.0) {
            return Err(Error::Config { field: name.into(), message: "must be finite and non-negative".into() });
        }
    }
    let mut rng = seeded_rng(seed, PERTURBATION_STREAM);
    Ok(values
        .iter()
        .map(|(key, var)| {
            let var = match var {
                Variable::Pose(p) => Variable::Pose(*p * Pose::exp(&gaussian_twist(&mut rng, sigma_rot, sigma_trans))),
                Variable::Point(p) => Variable::Point(p + gaussian_vec3(&mut rng, sigma_point)),
            };
            (*key, var)
        })
        .collect())
}
