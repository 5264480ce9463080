use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("x = {x} lies outside the channel [-1.5, 1.5]")]
    Domain { x: f64 },

    #[error("mesh generation failed: {0}")]
    MeshGeneration(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("non-physical state in cell {cell}: {reason}")]
    State { cell: usize, reason: String },

    #[error("solver diverged at step {step} in cell {cell}: {reason}")]
    Diverged {
        step: usize,
        cell: usize,
        reason: String,
    },

    #[error("point ({x}, {y}) could not be located in the mesh")]
    Location { x: f64, y: f64 },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("cannot fit normalizer: variable `{0}` has max equal to min")]
    DegenerateVariable(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("loss is undefined: {0}")]
    Loss(String),

    #[error("training diverged at epoch {epoch}")]
    TrainingDiverged { epoch: u64 },

    #[error("metric is undefined: {0}")]
    Metric(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("missing artifact {path}: run `nnlci {command}` first")]
    MissingArtifact { path: PathBuf, command: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Process exit status for this error: 1 for bad usage, 2 for bad or
    /// missing data, 3 for numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Argument(_) | Error::Config(_) | Error::Domain { .. } => 1,
            Error::InvalidMesh(_)
            | Error::Location { .. }
            | Error::DegenerateVariable(_)
            | Error::Shape(_)
            | Error::Format { .. }
            | Error::MissingArtifact { .. }
            | Error::Io { .. } => 2,
            Error::MeshGeneration(_)
            | Error::State { .. }
            | Error::Diverged { .. }
            | Error::Loss(_)
            | Error::TrainingDiverged { .. }
            | Error::Metric(_) => 3,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }
}
