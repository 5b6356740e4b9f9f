//! Front-end output consumed by the back-end: measurements, initial estimates
//! and (for synthetic scenes) ground truth.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::se3::{Point3, Pose};

/// Ground-truth trajectories and points.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GroundTruth {
    /// `k → X_k`.
    pub cameras: BTreeMap<usize, Pose>,
    /// `(j, k) → L_k` of object `j`.
    pub objects: BTreeMap<(usize, usize), Pose>,
    /// `(j, k−1, k) →` world-frame motion `ᵂH`.
    pub motions: BTreeMap<(usize, usize, usize), Pose>,
    /// `(i, k) →` world position of tracklet `i` at step `k`.
    pub points: BTreeMap<(usize, usize), Point3>,
}

impl GroundTruth {
    pub fn is_empty(&self) -> bool {
        self.cameras.is_empty() && self.objects.is_empty() && self.motions.is_empty() && self.points.is_empty()
    }
}

/// Observations of one dynamic tracklet.
#[derive(Clone, Debug, PartialEq)]
pub struct DynamicTrack {
    pub object: usize,
    /// `(k, z)` sorted by step.
    pub observations: Vec<(usize, Point3)>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SceneDataset {
    /// `k →` initial camera pose.
    pub camera_init: BTreeMap<usize, Pose>,
    /// `(k−1, k) →` measured relative pose `X_{k−1}⁻¹ X_k`.
    pub odometry: BTreeMap<(usize, usize), Pose>,
    /// `(j, k−1, k) →` initial world-frame object motion.
    pub motion_init: BTreeMap<(usize, usize, usize), Pose>,
    /// `(i, k) →` camera-frame measurement of static tracklet `i`.
    pub static_meas: BTreeMap<(usize, usize), Point3>,
    /// `(i, j, k) →` camera-frame measurement of tracklet `i` on object `j`.
    pub dynamic_meas: BTreeMap<(usize, usize, usize), Point3>,
    pub ground_truth: GroundTruth,
}

impl SceneDataset {
    pub fn num_steps(&self) -> usize {
        self.camera_init.len()
    }

    pub fn objects(&self) -> BTreeSet<usize> {
        self.dynamic_meas.keys().map(|&(_, j, _)| j).collect()
    }

    /// Static tracklets with their `(k, z)` observations sorted by step.
    pub fn static_tracks(&self) -> BTreeMap<usize, Vec<(usize, Point3)>> {
        let mut tracks: BTreeMap<usize, Vec<(usize, Point3)>> = BTreeMap::new();
        for (&(i, k), z) in &self.static_meas {
            tracks.entry(i).or_default().push((k, *z));
        }
        tracks
    }

    pub fn dynamic_tracks(&self) -> BTreeMap<usize, DynamicTrack> {
        let mut tracks: BTreeMap<usize, DynamicTrack> = BTreeMap::new();
        for (&(i, j, k), z) in &self.dynamic_meas {
            tracks
                .entry(i)
                .or_insert_with(|| DynamicTrack { object: j, observations: Vec::new() })
                .observations
                .push((k, *z));
        }
        tracks
    }

    /// Dynamic measurements of object `j` at step `k`, as `(i, z)`.
    pub fn object_observations(&self, j: usize, k: usize) -> Vec<(usize, Point3)> {
        self.dynamic_meas.iter().filter(|(&(_, oj, ok), _)| oj == j && ok == k).map(|(&(i, _, _), z)| (i, *z)).collect()
    }

    /// Checks cross-record consistency.
    ///
    /// Camera steps must be `0..K`, odometry and motions must link consecutive
    /// steps, every measurement must refer to an existing step, and a tracklet
    /// id must belong to one object (or be static) for its whole life.
    pub fn validate(&self) -> Result<()> {
        let k_total = self.num_steps();
        if k_total == 0 {
            return Err(Error::Dataset("no CAM_INIT records".into()));
        }
        if let Some((n, k)) = self.camera_init.keys().enumerate().find(|(n, k)| n != *k) {
            return Err(Error::Dataset(format!("camera steps must be 0..{k_total}; step {n} is missing (next is {k})")));
        }
        for k in 1..k_total {
            if !self.odometry.contains_key(&(k - 1, k)) {
                return Err(Error::Dataset(format!("missing ODOM {} {k}", k - 1)));
            }
        }
        let consecutive = |kp: usize, k: usize| kp + 1 == k && k < k_total;
        if let Some((kp, k)) = self.odometry.keys().find(|(kp, k)| !consecutive(*kp, *k)) {
            return Err(Error::Dataset(format!("ODOM {kp} {k} does not link consecutive steps in 0..{k_total}")));
        }
        if let Some((j, kp, k)) = self.motion_init.keys().find(|(_, kp, k)| !consecutive(*kp, *k)) {
            return Err(Error::Dataset(format!("MOTION_INIT {j} {kp} {k} does not link consecutive steps in 0..{k_total}")));
        }
        if let Some((i, k)) = self.static_meas.keys().find(|(_, k)| *k >= k_total) {
            return Err(Error::Dataset(format!("STATIC_MEAS {i} {k} refers to a step beyond {}", k_total - 1)));
        }
        let static_ids: BTreeSet<usize> = self.static_meas.keys().map(|&(i, _)| i).collect();
        let mut owner: BTreeMap<usize, usize> = BTreeMap::new();
        for &(i, j, k) in self.dynamic_meas.keys() {
            if k >= k_total {
                return Err(Error::Dataset(format!("DYN_MEAS {i} {j} {k} refers to a step beyond {}", k_total - 1)));
            }
            if static_ids.contains(&i) {
                return Err(Error::Dataset(format!("tracklet {i} is both static and dynamic")));
            }
            if let Some(prev) = owner.insert(i, j) {
                if prev != j {
                    return Err(Error::Dataset(format!("tracklet {i} changes object from {prev} to {j}")));
                }
            }
        }
        let mut seen_at_step: BTreeSet<(usize, usize)> = BTreeSet::new();
        for &(i, _, k) in self.dynamic_meas.keys() {
            if !seen_at_step.insert((i, k)) {
                return Err(Error::Dataset(format!("tracklet {i} observed twice at step {k}")));
            }
        }
        Ok(())
    }
}
