//! Experiment plumbing behind the `dynslam` binary: generate a scene, solve it
//! with one or all formulations, score the estimates and compare result
//! directories.

pub mod commands;
pub mod compare;
pub mod experiment;
pub mod manifest;

use std::path::PathBuf;

pub use commands::{cmd_eval, cmd_generate, cmd_solve, EvalSummary, GenerateSummary, SolveOutcome};
pub use compare::{cmd_compare, Comparison};
pub use experiment::{ExperimentSpec, Perturbation, Selection};

pub type Result<T, E = CliError> = std::result::Result<T, E>;

/// Process exit status for success.
pub const EXIT_OK: u8 = 0;
/// Bad input: configuration, dataset, or result directories.
pub const EXIT_VALIDATION: u8 = 1;
/// The optimizer could not produce an estimate.
pub const EXIT_SOLVER: u8 = 2;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] dynslam::Error),

    #[error("{}: {message}", path.display())]
    Toml { path: PathBuf, message: String },

    #[error("{0}")]
    Invalid(String),

    #[error("{formulation}: {source}")]
    Solve {
        formulation: String,
        #[source]
        source: dynslam::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Solve { .. } => EXIT_SOLVER,
            _ => EXIT_VALIDATION,
        }
    }
}
