//! Variables, values, noise models, and linearization of a factor graph.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{DMatrix, DVector, Vector3};

use crate::error::{Error, Result};
use crate::factors::Factor;
use crate::se3::{Point3, Pose, Twist};

/// Typed identifier of a state variable.
///
/// `k` is a time-step, `j` an object id and `i` a tracklet id. `ObjectMotion(j, k)`
/// is the world-frame motion of object `j` from `k - 1` to `k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum VariableKey {
    CameraPose(usize),
    ObjectMotion(usize, usize),
    ObjectPose(usize, usize),
    StaticPoint(usize),
    DynamicPointWorld(usize, usize),
    DynamicPointLocal(usize, usize),
}

impl VariableKey {
    pub fn is_pose(&self) -> bool {
        matches!(
            self,
            VariableKey::CameraPose(_) | VariableKey::ObjectMotion(..) | VariableKey::ObjectPose(..)
        )
    }

    pub fn tangent_dim(&self) -> usize {
        if self.is_pose() {
            6
        } else {
            3
        }
    }

    /// Short name of the key's kind, used in manifests.
    pub fn kind_name(&self) -> &'static str {
        match self {
            VariableKey::CameraPose(_) => "CameraPose",
            VariableKey::ObjectMotion(..) => "ObjectMotion",
            VariableKey::ObjectPose(..) => "ObjectPose",
            VariableKey::StaticPoint(_) => "StaticPoint",
            VariableKey::DynamicPointWorld(..) => "DynamicPointWorld",
            VariableKey::DynamicPointLocal(..) => "DynamicPointLocal",
        }
    }
}

impl fmt::Display for VariableKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VariableKey::CameraPose(k) => write!(f, "X({k})"),
            VariableKey::ObjectMotion(j, k) => write!(f, "H({j},{}->{k})", k.wrapping_sub(1)),
            VariableKey::ObjectPose(j, k) => write!(f, "L({j},{k})"),
            VariableKey::StaticPoint(i) => write!(f, "m({i})"),
            VariableKey::DynamicPointWorld(i, k) => write!(f, "m({i},{k})"),
            VariableKey::DynamicPointLocal(i, j) => write!(f, "mL({i},{j})"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Variable {
    Pose(Pose),
    Point(Point3),
}

impl Variable {
    pub fn tangent_dim(&self) -> usize {
        match self {
            Variable::Pose(_) => 6,
            Variable::Point(_) => 3,
        }
    }

    /// Right-perturbation update: `P · exp(δ)` for poses, `p + δ` for points.
    pub fn retract(&self, delta: &[f64]) -> Variable {
        match self {
            Variable::Pose(p) => Variable::Pose(p.compose(&Pose::exp(&Twist::from_column_slice(delta)))),
            Variable::Point(p) => Variable::Point(p + Vector3::from_column_slice(delta)),
        }
    }
}

/// Assignment of values to variable keys.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Values {
    entries: BTreeMap<VariableKey, Variable>,
}

impl Values {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert_pose(&mut self, key: VariableKey, pose: Pose) {
        debug_assert!(key.is_pose(), "{key} is not a pose key");
        self.entries.insert(key, Variable::Pose(pose));
    }

    pub fn insert_point(&mut self, key: VariableKey, point: Point3) {
        debug_assert!(!key.is_pose(), "{key} is not a point key");
        self.entries.insert(key, Variable::Point(point));
    }

    pub fn get(&self, key: &VariableKey) -> Option<&Variable> {
        self.entries.get(key)
    }

    pub fn contains(&self, key: &VariableKey) -> bool {
        self.entries.contains_key(key)
    }

    pub fn pose(&self, key: &VariableKey) -> Result<&Pose> {
        match self.entries.get(key) {
            Some(Variable::Pose(p)) => Ok(p),
            Some(Variable::Point(_)) => Err(Error::WrongVariableType { key: *key, expected: "pose" }),
            None => Err(Error::MissingKey(*key)),
        }
    }

    pub fn point(&self, key: &VariableKey) -> Result<&Point3> {
        match self.entries.get(key) {
            Some(Variable::Point(p)) => Ok(p),
            Some(Variable::Pose(_)) => Err(Error::WrongVariableType { key: *key, expected: "point" }),
            None => Err(Error::MissingKey(*key)),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&VariableKey, &Variable)> {
        self.entries.iter()
    }

    pub fn keys(&self) -> impl Iterator<Item = &VariableKey> {
        self.entries.keys()
    }

    pub fn tangent_dim(&self) -> usize {
        self.entries.values().map(Variable::tangent_dim).sum()
    }

    /// Applies `delta`, laid out in key order, to every variable.
    pub fn retract(&self, delta: &DVector<f64>) -> Result<Values> {
        let expected = self.tangent_dim();
        if delta.len() != expected {
            return Err(Error::DimensionMismatch { expected, got: delta.len() });
        }
        let mut offset = 0;
        let mut entries = BTreeMap::new();
        for (key, var) in &self.entries {
            let d = var.tangent_dim();
            entries.insert(*key, var.retract(&delta.as_slice()[offset..offset + d]));
            offset += d;
        }
        Ok(Values { entries })
    }

    /// Retracts a single variable.
    pub fn retract_one(&self, key: &VariableKey, delta: &[f64]) -> Result<Values> {
        let var = self.entries.get(key).ok_or(Error::MissingKey(*key))?;
        if delta.len() != var.tangent_dim() {
            return Err(Error::DimensionMismatch { expected: var.tangent_dim(), got: delta.len() });
        }
        let mut out = self.clone();
        out.entries.insert(*key, var.retract(delta));
        Ok(out)
    }
}

impl FromIterator<(VariableKey, Variable)> for Values {
    fn from_iter<T: IntoIterator<Item = (VariableKey, Variable)>>(iter: T) -> Self {
        Values { entries: iter.into_iter().collect() }
    }
}

/// Diagonal Gaussian noise model.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseModel {
    sigmas: Vec<f64>,
}

impl NoiseModel {
    pub fn diagonal(sigmas: Vec<f64>) -> Result<Self> {
        if sigmas.is_empty() {
            return Err(Error::InvalidNoise("no sigmas given".into()));
        }
        if let Some(s) = sigmas.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            return Err(Error::InvalidNoise(format!("sigma {s} is not strictly positive")));
        }
        Ok(NoiseModel { sigmas })
    }

    pub fn isotropic(dim: usize, sigma: f64) -> Result<Self> {
        Self::diagonal(vec![sigma; dim])
    }

    /// Noise on a `[rotation | translation]` twist residual.
    pub fn twist(sigma_rot: f64, sigma_trans: f64) -> Result<Self> {
        Self::diagonal(vec![sigma_rot, sigma_rot, sigma_rot, sigma_trans, sigma_trans, sigma_trans])
    }

    pub fn dim(&self) -> usize {
        self.sigmas.len()
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }

    pub fn whiten(&self, residual: &mut DVector<f64>) {
        for (r, s) in residual.iter_mut().zip(&self.sigmas) {
            *r /= s;
        }
    }

    pub fn whiten_rows(&self, jacobian: &mut DMatrix<f64>) {
        for (mut row, s) in jacobian.row_iter_mut().zip(&self.sigmas) {
            row /= *s;
        }
    }
}

/// A list of factors.
#[derive(Clone, Debug, Default)]
pub struct FactorGraph {
    factors: Vec<Factor>,
}

impl FactorGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, factor: Factor) {
        self.factors.push(factor);
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn residual_dim(&self) -> usize {
        self.factors.iter().map(|f| f.noise().dim()).sum()
    }

    /// Sum of squared whitened residuals.
    pub fn chi2(&self, values: &Values) -> Result<f64> {
        let mut total = 0.0;
        for factor in &self.factors {
            total += factor.whitened_error(values)?.norm_squared();
        }
        Ok(total)
    }

    /// Checks that every key referenced by a factor has a value.
    pub fn check_keys(&self, values: &Values) -> Result<()> {
        for factor in &self.factors {
            for key in factor.keys() {
                if !values.contains(key) {
                    return Err(Error::MissingKey(*key));
                }
            }
        }
        Ok(())
    }
}

impl FromIterator<Factor> for FactorGraph {
    fn from_iter<T: IntoIterator<Item = Factor>>(iter: T) -> Self {
        FactorGraph { factors: iter.into_iter().collect() }
    }
}

/// Position of each variable in the stacked tangent vector (key order).
#[derive(Clone, Debug)]
pub struct VariableIndex {
    keys: Vec<VariableKey>,
    offsets: Vec<usize>,
    lookup: BTreeMap<VariableKey, usize>,
    dim: usize,
}

impl VariableIndex {
    pub fn new(values: &Values) -> Self {
        let mut keys = Vec::with_capacity(values.len());
        let mut offsets = Vec::with_capacity(values.len());
        let mut lookup = BTreeMap::new();
        let mut dim = 0;
        for (n, (key, var)) in values.iter().enumerate() {
            keys.push(*key);
            offsets.push(dim);
            lookup.insert(*key, n);
            dim += var.tangent_dim();
        }
        VariableIndex { keys, offsets, lookup, dim }
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn position(&self, key: &VariableKey) -> Option<usize> {
        self.lookup.get(key).copied()
    }

    pub fn key(&self, n: usize) -> VariableKey {
        self.keys[n]
    }

    pub fn offset(&self, n: usize) -> usize {
        self.offsets[n]
    }

    pub fn block_dim(&self, n: usize) -> usize {
        self.keys[n].tangent_dim()
    }
}

/// Whitened Jacobian blocks and residual of one factor.
#[derive(Clone, Debug)]
pub struct LinearFactor {
    /// Variable positions in the [`VariableIndex`], parallel to `jacobians`.
    pub variables: Vec<usize>,
    pub jacobians: Vec<DMatrix<f64>>,
    pub residual: DVector<f64>,
}

/// Block-sparse linearization `J δ + r` of a whole graph.
#[derive(Clone, Debug)]
pub struct SparseSystem {
    pub index: VariableIndex,
    pub factors: Vec<LinearFactor>,
}

impl SparseSystem {
    pub fn rows(&self) -> usize {
        self.factors.iter().map(|f| f.residual.len()).sum()
    }

    pub fn chi2(&self) -> f64 {
        self.factors.iter().map(|f| f.residual.norm_squared()).sum()
    }

    /// Dense Jacobian and residual; intended for small problems and tests.
    pub fn to_dense(&self) -> (DMatrix<f64>, DVector<f64>) {
        let mut j = DMatrix::zeros(self.rows(), self.index.dim());
        let mut r = DVector::zeros(self.rows());
        let mut row = 0;
        for f in &self.factors {
            let m = f.residual.len();
            r.rows_mut(row, m).copy_from(&f.residual);
            for (&var, block) in f.variables.iter().zip(&f.jacobians) {
                let col = self.index.offset(var);
                j.view_mut((row, col), block.shape()).copy_from(block);
            }
            row += m;
        }
        (j, r)
    }
}

/// Linearizes every factor at `values`, whitening by each noise model.
pub fn linearize(graph: &FactorGraph, values: &Values) -> Result<SparseSystem> {
    let index = VariableIndex::new(values);
    let mut factors = Vec::with_capacity(graph.len());
    for factor in graph.factors() {
        let mut variables = Vec::with_capacity(factor.keys().len());
        for key in factor.keys() {
            variables.push(index.position(key).ok_or(Error::MissingKey(*key))?);
        }
        let (mut residual, mut jacobians) = factor.linearize(values)?;
        factor.noise().whiten(&mut residual);
        for j in &mut jacobians {
            factor.noise().whiten_rows(j);
        }
        factors.push(LinearFactor { variables, jacobians, residual });
    }
    Ok(SparseSystem { index, factors })
}

/// Step used by [`numerical_jacobian`].
pub const NUMERICAL_JACOBIAN_STEP: f64 = 1e-6;

/// Central finite-difference Jacobians of a factor's (unwhitened) residual with
/// respect to each of its keys, differentiating through the retraction.
pub fn numerical_jacobian(factor: &Factor, values: &Values) -> Result<Vec<DMatrix<f64>>> {
    let h = NUMERICAL_JACOBIAN_STEP;
    let rows = factor.noise().dim();
    let mut blocks = Vec::with_capacity(factor.keys().len());
    for key in factor.keys() {
        let dim = key.tangent_dim();
        let mut block = DMatrix::zeros(rows, dim);
        for c in 0..dim {
            let mut delta = vec![0.0; dim];
            delta[c] = h;
            let plus = factor.error(&values.retract_one(key, &delta)?)?;
            delta[c] = -h;
            let minus = factor.error(&values.retract_one(key, &delta)?)?;
            block.set_column(c, &((plus - minus) / (2.0 * h)));
        }
        blocks.push(block);
    }
    Ok(blocks)
}
