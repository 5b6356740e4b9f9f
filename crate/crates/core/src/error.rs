use std::path::PathBuf;

use thiserror::Error;

use crate::graph::VariableKey;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("SE(3) logarithm is singular: rotation angle {angle} rad is too close to π")]
    LogSingularity { angle: f64 },

    #[error("tangent dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("variable {0} is referenced by a factor but has no value")]
    MissingKey(VariableKey),

    #[error("variable {key} has the wrong type: expected a {expected}")]
    WrongVariableType { key: VariableKey, expected: &'static str },

    #[error("invalid noise model: {0}")]
    InvalidNoise(String),

    #[error("invalid dataset: {0}")]
    Dataset(String),

    #[error("invalid configuration: field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(
        "indeterminate linear system at variable {key} (pivot {pivot:.3e} vs diagonal {diagonal:.3e}); \
         object-centric formulations need a prior on the first pose of each object trajectory"
    )]
    Indeterminate { key: VariableKey, pivot: f64, diagonal: f64 },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
