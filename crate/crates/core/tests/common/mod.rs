#![allow(dead_code)]

use dynslam::se3::{Point3, Pose, Twist};
use dynslam::sim::{ObjectSpec, SceneConfig, SceneNoise};
use nalgebra::{UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn vec3(rng: &mut ChaCha8Rng, scale: f64) -> Vector3<f64> {
    Vector3::from_fn(|_, _| rng.random_range(-scale..=scale))
}

pub fn point(rng: &mut ChaCha8Rng) -> Point3 {
    Point3::from(vec3(rng, 3.0))
}

/// Random pose with rotation angle below `max_angle`.
pub fn pose_with_angle(rng: &mut ChaCha8Rng, max_angle: f64) -> Pose {
    let axis = loop {
        let v = vec3(rng, 1.0);
        if v.norm() > 1e-3 {
            break v.normalize();
        }
    };
    let angle = rng.random_range(0.0..max_angle);
    Pose::new(UnitQuaternion::from_scaled_axis(axis * angle), vec3(rng, 2.0))
}

pub fn pose(rng: &mut ChaCha8Rng) -> Pose {
    pose_with_angle(rng, 1.0)
}

pub fn twist(rng: &mut ChaCha8Rng, scale: f64) -> Twist {
    Twist::from_fn(|_, _| rng.random_range(-scale..=scale))
}

/// Small zero-noise scene: `steps` steps, `statics` static points and one object
/// with `object_points` points translating along x.
pub fn toy_config(steps: usize, statics: usize, object_points: usize) -> SceneConfig {
    SceneConfig {
        steps,
        static_points: statics,
        objects: vec![ObjectSpec {
            translation: [5.0, 1.0, 0.0],
            twist: [0.0, 0.0, 0.0, 0.5, 0.0, 0.0],
            points: object_points,
            ..Default::default()
        }],
        noise: SceneNoise::zero(),
        ..Default::default()
    }
}

pub fn zero_noise_default() -> SceneConfig {
    SceneConfig { noise: SceneNoise::zero(), ..Default::default() }
}
