//! Assembly of a [`SceneDataset`] into the four factor-graph formulations.
//!
//! All formulations share the camera prior, odometry, static points and the set
//! of motion variables, so those sub-graphs are identical factor by factor.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::dataset::SceneDataset;
use crate::error::{Error, Result};
use crate::factors::Factor;
use crate::graph::{FactorGraph, NoiseModel, Values, VariableKey};
use crate::se3::{Point3, Pose};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Formulation {
    WorldCentric,
    ObjectCentricBase,
    ObjectCentricWithOKF,
    ObjectCentricOnlyOKF,
}

impl Formulation {
    pub const ALL: [Formulation; 4] = [
        Formulation::WorldCentric,
        Formulation::ObjectCentricBase,
        Formulation::ObjectCentricWithOKF,
        Formulation::ObjectCentricOnlyOKF,
    ];

    /// Command-line name.
    pub fn name(&self) -> &'static str {
        match self {
            Formulation::WorldCentric => "world",
            Formulation::ObjectCentricBase => "oc-base",
            Formulation::ObjectCentricWithOKF => "oc-okf",
            Formulation::ObjectCentricOnlyOKF => "oc-only-okf",
        }
    }

    pub fn is_object_centric(&self) -> bool {
        *self != Formulation::WorldCentric
    }

    fn has_point_motion_factors(&self) -> bool {
        matches!(self, Formulation::ObjectCentricBase | Formulation::ObjectCentricWithOKF)
    }

    fn has_kinematic_factors(&self) -> bool {
        matches!(self, Formulation::ObjectCentricWithOKF | Formulation::ObjectCentricOnlyOKF)
    }
}

impl fmt::Display for Formulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Formulation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Formulation::ALL.into_iter().find(|f| f.name() == s).ok_or_else(|| Error::Config {
            field: "formulation".into(),
            message: format!("unknown formulation `{s}` (expected world, oc-base, oc-okf or oc-only-okf)"),
        })
    }
}

/// Factor standard deviations used by the builders.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    /// Point measurements, both static and dynamic (m).
    pub point: f64,
    pub odometry_rot: f64,
    pub odometry_trans: f64,
    /// Point-motion factors: world ternary and object-centric matrix difference (m).
    pub point_motion: f64,
    pub smoothing_rot: f64,
    pub smoothing_trans: f64,
    pub kinematic_rot: f64,
    pub kinematic_trans: f64,
    /// Camera and object-pose priors (rad and m alike).
    pub prior: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            point: 0.05,
            odometry_rot: 0.01,
            odometry_trans: 0.02,
            point_motion: 0.05,
            smoothing_rot: 0.04,
            smoothing_trans: 0.2,
            kinematic_rot: 0.02,
            kinematic_trans: 0.05,
            prior: 1e-4,
        }
    }
}

/// Where the prior on the first pose of each object trajectory comes from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectPriorMode {
    /// Mean at the centroid-initialized pose.
    #[default]
    Centroid,
    /// Mean at the ground-truth pose; object trajectories are then initialized by
    /// propagating the initial motions from that pose, so estimates live in the
    /// ground-truth object frame.
    GroundTruth,
    /// No object prior. Leaves object-centric problems with a gauge freedom.
    None,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BuildOptions {
    pub noise: NoiseConfig,
    pub object_prior: ObjectPriorMode,
}

/// What a factor is for; distinguishes e.g. static from dynamic measurements,
/// which share a residual.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FactorRole {
    CameraPrior,
    ObjectPrior,
    Odometry,
    StaticMeasurement,
    DynamicMeasurement,
    TernaryMotion,
    Smoothing,
    ObjectCentricMotion,
    ObjectKinematic,
}

impl FactorRole {
    pub const ALL: [FactorRole; 9] = [
        FactorRole::CameraPrior,
        FactorRole::ObjectPrior,
        FactorRole::Odometry,
        FactorRole::StaticMeasurement,
        FactorRole::DynamicMeasurement,
        FactorRole::TernaryMotion,
        FactorRole::Smoothing,
        FactorRole::ObjectCentricMotion,
        FactorRole::ObjectKinematic,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            FactorRole::CameraPrior => "camera_prior",
            FactorRole::ObjectPrior => "object_prior",
            FactorRole::Odometry => "odometry",
            FactorRole::StaticMeasurement => "static_measurement",
            FactorRole::DynamicMeasurement => "dynamic_measurement",
            FactorRole::TernaryMotion => "ternary_motion",
            FactorRole::Smoothing => "smoothing",
            FactorRole::ObjectCentricMotion => "object_centric_motion",
            FactorRole::ObjectKinematic => "object_kinematic",
        }
    }
}

/// Variable and factor counts of a built problem.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Manifest {
    /// Keyed by [`VariableKey::kind_name`].
    pub variables: BTreeMap<&'static str, usize>,
    pub factors: BTreeMap<FactorRole, usize>,
    /// Dynamic tracklets observed at a single step; they carry no motion factor.
    pub single_observation_tracklets: Vec<usize>,
}

impl Manifest {
    pub fn variable_count(&self, kind: &str) -> usize {
        self.variables.get(kind).copied().unwrap_or(0)
    }

    pub fn factor_count(&self, role: FactorRole) -> usize {
        self.factors.get(&role).copied().unwrap_or(0)
    }

    pub fn total_variables(&self) -> usize {
        self.variables.values().sum()
    }

    pub fn total_factors(&self) -> usize {
        self.factors.values().sum()
    }
}

#[derive(Clone, Debug)]
pub struct BuiltProblem {
    pub formulation: Formulation,
    pub graph: FactorGraph,
    pub initial: Values,
    pub manifest: Manifest,
    /// Role of each factor, parallel to `graph.factors()`.
    pub roles: Vec<FactorRole>,
}

/// Translation at the mean of `points`, identity rotation.
pub fn centroid_init(points: &[Point3]) -> Result<Pose> {
    if points.is_empty() {
        return Err(Error::Dataset("cannot take the centroid of an empty point set".into()));
    }
    let sum: Vector3<f64> = points.iter().map(|p| p.coords).sum();
    let c = sum / points.len() as f64;
    Ok(Pose::from_translation(c.x, c.y, c.z))
}

pub fn build(dataset: &SceneDataset, formulation: Formulation, options: &BuildOptions) -> Result<BuiltProblem> {
    match formulation {
        Formulation::WorldCentric => build_world_centric(dataset, options),
        v => build_object_centric(dataset, v, options),
    }
}

struct Builder {
    graph: FactorGraph,
    roles: Vec<FactorRole>,
    values: Values,
}

impl Builder {
    fn add(&mut self, role: FactorRole, factor: Factor) {
        self.graph.add(factor);
        self.roles.push(role);
    }

    fn finish(self, formulation: Formulation, single_observation_tracklets: Vec<usize>) -> BuiltProblem {
        let mut manifest = Manifest { single_observation_tracklets, ..Default::default() };
        for key in self.values.keys() {
            *manifest.variables.entry(key.kind_name()).or_default() += 1;
        }
        for role in &self.roles {
            *manifest.factors.entry(*role).or_default() += 1;
        }
        BuiltProblem { formulation, graph: self.graph, initial: self.values, manifest, roles: self.roles }
    }
}

struct Noises {
    point: NoiseModel,
    odometry: NoiseModel,
    point_motion: NoiseModel,
    smoothing: NoiseModel,
    kinematic: NoiseModel,
    prior: NoiseModel,
}

impl Noises {
    fn new(c: &NoiseConfig) -> Result<Self> {
        Ok(Noises {
            point: NoiseModel::isotropic(3, c.point)?,
            odometry: NoiseModel::twist(c.odometry_rot, c.odometry_trans)?,
            point_motion: NoiseModel::isotropic(3, c.point_motion)?,
            smoothing: NoiseModel::twist(c.smoothing_rot, c.smoothing_trans)?,
            kinematic: NoiseModel::twist(c.kinematic_rot, c.kinematic_trans)?,
            prior: NoiseModel::isotropic(6, c.prior)?,
        })
    }
}

/// Steps `k` at which object `j` has a motion variable `H(j, k)`: some tracklet of
/// the object is observed at both `k − 1` and `k`.
fn motion_steps(dataset: &SceneDataset) -> BTreeSet<(usize, usize)> {
    let observed: BTreeSet<(usize, usize, usize)> = dataset.dynamic_meas.keys().copied().collect();
    observed
        .iter()
        .filter(|&&(i, j, k)| k > 0 && observed.contains(&(i, j, k - 1)))
        .map(|&(_, j, k)| (j, k))
        .collect()
}

/// Camera prior, odometry, static points, motion variables and smoothing.
fn build_common(dataset: &SceneDataset, noises: &Noises) -> Result<Builder> {
    dataset.validate()?;
    let k_total = dataset.num_steps();
    if k_total < 2 {
        return Err(Error::Dataset(format!("at least 2 time-steps are required, got {k_total}")));
    }
    let mut b = Builder { graph: FactorGraph::new(), roles: Vec::new(), values: Values::new() };

    for (&k, x) in &dataset.camera_init {
        b.values.insert_pose(VariableKey::CameraPose(k), *x);
    }
    let x0 = VariableKey::CameraPose(0);
    b.add(FactorRole::CameraPrior, Factor::prior_pose(x0, dataset.camera_init[&0], noises.prior.clone())?);
    for (&(kp, k), t) in &dataset.odometry {
        let f = Factor::odometry(VariableKey::CameraPose(kp), VariableKey::CameraPose(k), *t, noises.odometry.clone())?;
        b.add(FactorRole::Odometry, f);
    }

    for (i, observations) in dataset.static_tracks() {
        let key = VariableKey::StaticPoint(i);
        let (k0, z0) = observations[0];
        b.values.insert_point(key, dataset.camera_init[&k0].transform_point(&z0));
        for (k, z) in observations {
            let f = Factor::point_measurement(VariableKey::CameraPose(k), key, z, noises.point.clone())?;
            b.add(FactorRole::StaticMeasurement, f);
        }
    }

    let motions = motion_steps(dataset);
    for &(j, k) in &motions {
        let init = dataset
            .motion_init
            .get(&(j, k - 1, k))
            .ok_or_else(|| Error::Dataset(format!("missing MOTION_INIT {j} {} {k}", k - 1)))?;
        b.values.insert_pose(VariableKey::ObjectMotion(j, k), *init);
    }
    for &(j, k) in &motions {
        if motions.contains(&(j, k + 1)) {
            let f = Factor::motion_smoothing(
                VariableKey::ObjectMotion(j, k),
                VariableKey::ObjectMotion(j, k + 1),
                noises.smoothing.clone(),
            )?;
            b.add(FactorRole::Smoothing, f);
        }
    }
    Ok(b)
}

fn single_observation_tracklets(dataset: &SceneDataset) -> Vec<usize> {
    dataset.dynamic_tracks().into_iter().filter(|(_, t)| t.observations.len() == 1).map(|(i, _)| i).collect()
}

/// World-centric graph: one world point per dynamic observation, linked by
/// ternary motion factors.
pub fn build_world_centric(dataset: &SceneDataset, options: &BuildOptions) -> Result<BuiltProblem> {
    let noises = Noises::new(&options.noise)?;
    let mut b = build_common(dataset, &noises)?;
    for (i, track) in dataset.dynamic_tracks() {
        let j = track.object;
        for (n, &(k, z)) in track.observations.iter().enumerate() {
            let key = VariableKey::DynamicPointWorld(i, k);
            b.values.insert_point(key, dataset.camera_init[&k].transform_point(&z));
            let f = Factor::point_measurement(VariableKey::CameraPose(k), key, z, noises.point.clone())?;
            b.add(FactorRole::DynamicMeasurement, f);
            if n > 0 && track.observations[n - 1].0 + 1 == k {
                let f = Factor::world_motion_ternary(
                    key,
                    VariableKey::DynamicPointWorld(i, k - 1),
                    VariableKey::ObjectMotion(j, k),
                    noises.point_motion.clone(),
                )?;
                b.add(FactorRole::TernaryMotion, f);
            }
        }
    }
    Ok(b.finish(Formulation::WorldCentric, single_observation_tracklets(dataset)))
}

/// Object-centric graph in one of its three variants.
pub fn build_object_centric(dataset: &SceneDataset, variant: Formulation, options: &BuildOptions) -> Result<BuiltProblem> {
    if !variant.is_object_centric() {
        return Err(Error::Config { field: "formulation".into(), message: format!("{variant} is not object-centric") });
    }
    let noises = Noises::new(&options.noise)?;
    let mut b = build_common(dataset, &noises)?;

    // Object poses wherever the object is observed.
    let mut object_steps: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    for &(_, j, k) in dataset.dynamic_meas.keys() {
        object_steps.entry(j).or_default().insert(k);
    }
    for (&j, steps) in &object_steps {
        let k0 = *steps.first().expect("object has observations");
        let centroid_at = |k: usize| {
            let x = dataset.camera_init[&k];
            let points: Vec<Point3> = dataset.object_observations(j, k).iter().map(|(_, z)| x.transform_point(z)).collect();
            centroid_init(&points)
        };
        let start = match options.object_prior {
            ObjectPriorMode::GroundTruth => *dataset
                .ground_truth
                .objects
                .get(&(j, k0))
                .ok_or_else(|| Error::Dataset(format!("missing GT_OBJ {j} {k0} required by the ground-truth object prior")))?,
            _ => centroid_at(k0)?,
        };
        let mut prev: Option<(usize, Pose)> = None;
        for &k in steps {
            let pose = match (options.object_prior, prev) {
                (ObjectPriorMode::GroundTruth, Some((kp, lp))) => match b.values.pose(&VariableKey::ObjectMotion(j, k)) {
                    Ok(h) if kp + 1 == k => *h * lp,
                    _ => Pose::new(lp.quaternion(), centroid_at(k)?.translation()),
                },
                (_, None) => start,
                _ => centroid_at(k)?,
            };
            b.values.insert_pose(VariableKey::ObjectPose(j, k), pose);
            prev = Some((k, pose));
        }
        if options.object_prior != ObjectPriorMode::None {
            let f = Factor::prior_pose(VariableKey::ObjectPose(j, k0), start, noises.prior.clone())?;
            b.add(FactorRole::ObjectPrior, f);
        }
    }

    for (i, track) in dataset.dynamic_tracks() {
        let j = track.object;
        let local = VariableKey::DynamicPointLocal(i, j);
        let (k0, z0) = track.observations[0];
        let l0 = b.values.pose(&VariableKey::ObjectPose(j, k0))?;
        let m_l = l0.inverse_transform_point(&dataset.camera_init[&k0].transform_point(&z0));
        b.values.insert_point(local, m_l);
        for (n, &(k, z)) in track.observations.iter().enumerate() {
            let f = Factor::object_point_measurement(
                VariableKey::CameraPose(k),
                VariableKey::ObjectPose(j, k),
                local,
                z,
                noises.point.clone(),
            )?;
            b.add(FactorRole::DynamicMeasurement, f);
            if variant.has_point_motion_factors() && n > 0 && track.observations[n - 1].0 + 1 == k {
                let f = Factor::object_centric_motion(
                    VariableKey::ObjectPose(j, k),
                    VariableKey::ObjectPose(j, k - 1),
                    VariableKey::ObjectMotion(j, k),
                    local,
                    noises.point_motion.clone(),
                )?;
                b.add(FactorRole::ObjectCentricMotion, f);
            }
        }
    }

    if variant.has_kinematic_factors() {
        for (j, k) in motion_steps(dataset) {
            let f = Factor::object_kinematic(
                VariableKey::ObjectPose(j, k),
                VariableKey::ObjectPose(j, k - 1),
                VariableKey::ObjectMotion(j, k),
                noises.kinematic.clone(),
            )?;
            b.add(FactorRole::ObjectKinematic, f);
        }
    }
    Ok(b.finish(variant, single_observation_tracklets(dataset)))
}

/// The ground-truth assignment of every variable of `problem`.
///
/// Static points take their first ground-truth position; local object points
/// are expressed in the ground-truth object frame at the tracklet's first step.
pub fn ground_truth_values(dataset: &SceneDataset, problem: &BuiltProblem) -> Result<Values> {
    let gt = &dataset.ground_truth;
    let missing = |what: String| Error::Dataset(format!("ground truth lacks {what}"));
    let first_point = |i: usize| {
        gt.points.range((i, 0)..=(i, usize::MAX)).next().map(|(&(_, k), p)| (k, *p)).ok_or_else(|| missing(format!("GT_POINT {i}")))
    };
    let mut values = Values::new();
    for key in problem.initial.keys() {
        match *key {
            VariableKey::CameraPose(k) => {
                values.insert_pose(*key, *gt.cameras.get(&k).ok_or_else(|| missing(format!("GT_CAM {k}")))?)
            }
            VariableKey::ObjectMotion(j, k) => values.insert_pose(
                *key,
                *gt.motions.get(&(j, k - 1, k)).ok_or_else(|| missing(format!("GT_MOTION {j} {} {k}", k - 1)))?,
            ),
            VariableKey::ObjectPose(j, k) => {
                values.insert_pose(*key, *gt.objects.get(&(j, k)).ok_or_else(|| missing(format!("GT_OBJ {j} {k}")))?)
            }
            VariableKey::StaticPoint(i) => values.insert_point(*key, first_point(i)?.1),
            VariableKey::DynamicPointWorld(i, k) => {
                values.insert_point(*key, *gt.points.get(&(i, k)).ok_or_else(|| missing(format!("GT_POINT {i} {k}")))?)
            }
            VariableKey::DynamicPointLocal(i, j) => {
                let (k, p) = first_point(i)?;
                let l = gt.objects.get(&(j, k)).ok_or_else(|| missing(format!("GT_OBJ {j} {k}")))?;
                values.insert_point(*key, l.inverse_transform_point(&p));
            }
        }
    }
    Ok(values)
}
