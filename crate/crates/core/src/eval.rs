//! Relative pose error (RPE) of camera trajectories, object motions and object
//! poses, and propagation of object trajectories from world-frame motions.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::graph::{Values, Variable, VariableKey};
use crate::se3::Pose;

/// Error of one compared transform pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RpeSample {
    /// Step of the later pose of the compared pair.
    pub step: usize,
    /// Translational error (m).
    pub e_t: f64,
    /// Rotational error (degrees).
    pub e_r: f64,
}

/// `E = M⁻¹ M_gt`; returns `(‖t(E)‖, angle(E) in degrees)`.
pub fn rpe(m: &Pose, m_gt: &Pose) -> (f64, f64) {
    let e = m.between(m_gt);
    let r = e.rotation();
    // atan2 form of arccos((tr R − 1)/2); stays accurate near 0 and π.
    let sin = 0.5 * nalgebra::Vector3::new(r[(2, 1)] - r[(1, 2)], r[(0, 2)] - r[(2, 0)], r[(1, 0)] - r[(0, 1)]).norm();
    let cos = 0.5 * (r.trace() - 1.0);
    (e.translation().norm(), sin.atan2(cos).to_degrees())
}

/// Samples of one trajectory (camera or one object) with their arithmetic means.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RpeSeries {
    pub samples: Vec<RpeSample>,
}

impl RpeSeries {
    pub fn push(&mut self, step: usize, m: &Pose, m_gt: &Pose) {
        let (e_t, e_r) = rpe(m, m_gt);
        self.samples.push(RpeSample { step, e_t, e_r });
    }

    /// `(mean E_t, mean E_r)`, or `None` without samples.
    pub fn mean(&self) -> Option<(f64, f64)> {
        if self.samples.is_empty() {
            return None;
        }
        let n = self.samples.len() as f64;
        let t = self.samples.iter().map(|s| s.e_t).sum::<f64>() / n;
        let r = self.samples.iter().map(|s| s.e_r).sum::<f64>() / n;
        Some((t, r))
    }
}

/// Per-object series with the cross-object mean of the per-object means.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ObjectRpe {
    pub per_object: BTreeMap<usize, RpeSeries>,
}

impl ObjectRpe {
    /// Mean over objects that have at least one sample.
    pub fn mean(&self) -> Option<(f64, f64)> {
        let means: Vec<(f64, f64)> = self.per_object.values().filter_map(RpeSeries::mean).collect();
        if means.is_empty() {
            return None;
        }
        let n = means.len() as f64;
        Some((means.iter().map(|m| m.0).sum::<f64>() / n, means.iter().map(|m| m.1).sum::<f64>() / n))
    }

    /// Objects with fewer than two poses, which yield no sample.
    pub fn untracked(&self) -> Vec<usize> {
        self.per_object.iter().filter(|(_, s)| s.samples.is_empty()).map(|(j, _)| *j).collect()
    }
}

/// RPE of relative camera poses `X_{k−1}⁻¹ X_k` over consecutive steps.
pub fn camera_rpe(est: &BTreeMap<usize, Pose>, gt: &BTreeMap<usize, Pose>) -> Result<RpeSeries> {
    if est.len() != gt.len() || est.keys().ne(gt.keys()) {
        return Err(Error::Dataset(format!(
            "camera steps differ: {} estimated, {} in ground truth",
            est.len(),
            gt.len()
        )));
    }
    if est.len() < 2 {
        return Err(Error::Dataset("camera RPE needs at least 2 steps".into()));
    }
    let mut series = RpeSeries::default();
    let steps: Vec<usize> = est.keys().copied().collect();
    for w in steps.windows(2) {
        let m = est[&w[0]].between(&est[&w[1]]);
        let m_gt = gt[&w[0]].between(&gt[&w[1]]);
        series.push(w[1], &m, &m_gt);
    }
    Ok(series)
}

/// Direct RPE of world-frame motions keyed `(j, k)` against ground truth keyed
/// `(j, k−1, k)`. The two key sets must match.
pub fn object_motion_rpe(
    est: &BTreeMap<(usize, usize), Pose>,
    gt: &BTreeMap<(usize, usize, usize), Pose>,
) -> Result<ObjectRpe> {
    if let Some(&(j, kp, k)) = gt.keys().find(|&&(j, _, k)| !est.contains_key(&(j, k))) {
        return Err(Error::Dataset(format!("no estimated motion for object {j} from step {kp} to {k}")));
    }
    let mut out = ObjectRpe::default();
    for (&(j, k), m) in est {
        let m_gt = k
            .checked_sub(1)
            .and_then(|kp| gt.get(&(j, kp, k)))
            .ok_or_else(|| Error::Dataset(format!("no ground-truth motion for object {j} at step {k}")))?;
        out.per_object.entry(j).or_default().push(k, m, m_gt);
    }
    Ok(out)
}

/// `L_k = ᵂH_{k−1,k} · L_{k−1}` from `start`; the result begins with `start`.
pub fn propagate_object_trajectory(start: &Pose, motions: &[Pose]) -> Vec<Pose> {
    let mut poses = Vec::with_capacity(motions.len() + 1);
    poses.push(*start);
    for h in motions {
        let prev = *poses.last().expect("non-empty");
        poses.push(*h * prev);
    }
    poses
}

/// RPE of relative object poses `L_{k−1}⁻¹ L_k` for every consecutive pair of
/// estimated poses; ground truth must cover every estimated pose.
pub fn object_pose_rpe(est: &BTreeMap<(usize, usize), Pose>, gt: &BTreeMap<(usize, usize), Pose>) -> Result<ObjectRpe> {
    let mut out = ObjectRpe::default();
    for (&(j, k), l) in est {
        let l_gt = gt.get(&(j, k)).ok_or_else(|| Error::Dataset(format!("no ground-truth pose for object {j} at step {k}")))?;
        let series = out.per_object.entry(j).or_default();
        if let Some(kp) = k.checked_sub(1) {
            if let (Some(lp), Some(lp_gt)) = (est.get(&(j, kp)), gt.get(&(j, kp))) {
                series.push(k, &lp.between(l), &lp_gt.between(l_gt));
            }
        }
    }
    Ok(out)
}

/// Object poses from world-frame motions, each trajectory seeded with the
/// ground-truth pose at the step before its first motion.
pub fn propagate_from_ground_truth(
    motions: &BTreeMap<(usize, usize), Pose>,
    gt_objects: &BTreeMap<(usize, usize), Pose>,
) -> Result<BTreeMap<(usize, usize), Pose>> {
    let mut out = BTreeMap::new();
    let mut prev: Option<(usize, usize)> = None;
    for (&(j, k), h) in motions {
        let kp = k.checked_sub(1).ok_or_else(|| Error::Dataset(format!("motion of object {j} at step 0")))?;
        let seeded = prev == Some((j, kp)) && out.contains_key(&(j, kp));
        if !seeded {
            let start = gt_objects
                .get(&(j, kp))
                .ok_or_else(|| Error::Dataset(format!("no ground-truth pose for object {j} at step {kp}")))?;
            out.insert((j, kp), *start);
        }
        let l = *h * out[&(j, kp)];
        out.insert((j, k), l);
        prev = Some((j, k));
    }
    Ok(out)
}

/// Estimated trajectories pulled out of solver values.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Estimates {
    pub cameras: BTreeMap<usize, Pose>,
    /// `(j, k) →` motion from `k − 1` to `k`.
    pub motions: BTreeMap<(usize, usize), Pose>,
    pub objects: BTreeMap<(usize, usize), Pose>,
}

impl Estimates {
    pub fn from_values(values: &Values) -> Self {
        let mut e = Estimates::default();
        for (key, var) in values.iter() {
            let Variable::Pose(p) = var else { continue };
            match *key {
                VariableKey::CameraPose(k) => {
                    e.cameras.insert(k, *p);
                }
                VariableKey::ObjectMotion(j, k) => {
                    e.motions.insert((j, k), *p);
                }
                VariableKey::ObjectPose(j, k) => {
                    e.objects.insert((j, k), *p);
                }
                _ => {}
            }
        }
        e
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rpe_examples() {
        assert_eq!(rpe(&Pose::identity(), &Pose::identity()), (0.0, 0.0));
        let (t, r) = rpe(&Pose::identity(), &Pose::from_translation(3.0, 4.0, 0.0));
        assert!((t - 5.0).abs() < 1e-12 && r == 0.0);
        let (t, r) = rpe(&Pose::rot_z(std::f64::consts::FRAC_PI_2), &Pose::identity());
        assert!(t.abs() < 1e-12 && (r - 90.0).abs() < 1e-9);
    }

    #[test]
    fn propagation_by_composition() {
        let t = Pose::from_translation(1.0, 0.0, 0.0);
        let poses = propagate_object_trajectory(&Pose::identity(), &[t, t]);
        assert_eq!(poses.len(), 3);
        assert!(poses[1].max_abs_diff(&Pose::from_translation(1.0, 0.0, 0.0)) < 1e-15);
        assert!(poses[2].max_abs_diff(&Pose::from_translation(2.0, 0.0, 0.0)) < 1e-15);
    }

    #[test]
    fn single_pose_object_is_untracked() {
        let est: BTreeMap<_, _> = [((4, 2), Pose::identity())].into_iter().collect();
        let r = object_pose_rpe(&est, &est).unwrap();
        assert_eq!(r.untracked(), vec![4]);
        assert_eq!(r.mean(), None);
    }
}
