//! The serializable description of one solve run.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use dynslam::builders::{BuildOptions, Formulation};
use dynslam::sim::SceneConfig;
use dynslam::solver::SolverConfig;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::{CliError, Result};

/// One formulation or all four.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Selection {
    #[default]
    All,
    One(Formulation),
}

impl Selection {
    pub fn formulations(&self) -> Vec<Formulation> {
        match self {
            Selection::All => Formulation::ALL.to_vec(),
            Selection::One(f) => vec![*f],
        }
    }
}

impl FromStr for Selection {
    type Err = dynslam::Error;

    fn from_str(s: &str) -> dynslam::Result<Self> {
        if s == "all" {
            Ok(Selection::All)
        } else {
            s.parse().map(Selection::One)
        }
    }
}

impl TryFrom<String> for Selection {
    type Error = dynslam::Error;

    fn try_from(s: String) -> dynslam::Result<Self> {
        s.parse()
    }
}

impl From<Selection> for String {
    fn from(s: Selection) -> String {
        s.to_string()
    }
}

impl fmt::Display for Selection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Selection::All => f.write_str("all"),
            Selection::One(x) => x.fmt(f),
        }
    }
}

/// Standard deviations of the perturbation applied to the initial values
/// before solving; all zero leaves the builders' initialization untouched.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Perturbation {
    pub rot: f64,
    pub trans: f64,
    pub point: f64,
}

impl Perturbation {
    pub fn is_zero(&self) -> bool {
        self.rot == 0.0 && self.trans == 0.0 && self.point == 0.0
    }
}

/// Everything needed to rerun a solve. Saved as `experiment.toml` next to the
/// results with paths made absolute.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    /// Dataset file; exclusive with `scene`.
    pub dataset: Option<PathBuf>,
    /// Scene configuration to generate the dataset from; exclusive with `dataset`.
    pub scene: Option<PathBuf>,
    pub formulation: Selection,
    pub out: PathBuf,
    /// Overrides the scene seed and seeds the perturbation stream.
    pub seed: Option<u64>,
    pub perturbation: Perturbation,
    pub solver: SolverConfig,
    pub build: BuildOptions,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            dataset: None,
            scene: None,
            formulation: Selection::All,
            out: PathBuf::from("results"),
            seed: None,
            perturbation: Perturbation::default(),
            solver: SolverConfig::default(),
            build: BuildOptions::default(),
        }
    }
}

impl ExperimentSpec {
    pub fn load(path: &Path) -> Result<Self> {
        load_toml(path)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("experiment specs always serialize")
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.dataset, &self.scene) {
            (Some(_), Some(_)) => return Err(CliError::Invalid("give either a dataset or a scene config, not both".into())),
            (None, None) => return Err(CliError::Invalid("no input: give --dataset or a scene config".into())),
            _ => {}
        }
        let p = &self.perturbation;
        for (field, v) in [("perturbation.rot", p.rot), ("perturbation.trans", p.trans), ("perturbation.point", p.point)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(dynslam::Error::Config { field: field.into(), message: "must be finite and non-negative".into() }.into());
            }
        }
        self.solver.validate()?;
        Ok(())
    }

    pub fn perturbation_seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }
}

/// Reads a scene configuration; missing keys take their defaults.
pub fn load_scene_config(path: &Path) -> Result<SceneConfig> {
    load_toml(path)
}

fn load_toml<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = dynslam::io::read_file(path)?;
    toml::from_str(&text).map_err(|e| CliError::Toml { path: path.to_path_buf(), message: e.to_string() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selection_names() {
        assert_eq!("all".parse::<Selection>().unwrap(), Selection::All);
        assert_eq!("oc-okf".parse::<Selection>().unwrap(), Selection::One(Formulation::ObjectCentricWithOKF));
        assert!("okf".parse::<Selection>().is_err());
        assert_eq!(Selection::All.formulations().len(), 4);
    }

    #[test]
    fn spec_round_trips_through_toml() {
        let spec = ExperimentSpec {
            dataset: Some("/data/scene.txt".into()),
            formulation: Selection::One(Formulation::WorldCentric),
            seed: Some(7),
            perturbation: Perturbation { rot: 0.01, trans: 0.05, point: 0.05 },
            ..Default::default()
        };
        let back: ExperimentSpec = toml::from_str(&spec.to_toml()).unwrap();
        assert_eq!(back, spec);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<ExperimentSpec>("datset = \"x\"").is_err());
        assert!(toml::from_str::<SceneConfig>("step = 3").is_err());
        let c: SceneConfig = toml::from_str("steps = 3").unwrap();
        assert_eq!(c.steps, 3);
    }
}
