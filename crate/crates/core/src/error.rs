use std::path::PathBuf;

use thiserror::Error;

use crate::optim::LossRecord;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point cloud is empty")]
    EmptyCloud,

    #[error("invalid point cloud: {0}")]
    InvalidCloud(String),

    #[error("invalid warp parameters: {0}")]
    InvalidParams(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },

    #[error("point cloud has no track lengths")]
    MissingTrackLengths,

    #[error("point cloud has no normals")]
    MissingNormals,

    #[error("camera trajectory: {0}")]
    Trajectory(String),

    #[error("optimization diverged at step {step}: non-finite loss")]
    Diverged { step: usize, trace: Vec<LossRecord> },

    #[error("evaluation: {0}")]
    Eval(String),

    #[error("parse error in {path} at byte {offset}: {msg}")]
    Parse {
        path: PathBuf,
        offset: u64,
        msg: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable tag, used by the CLI error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::EmptyCloud => "empty_cloud",
            Error::InvalidCloud(_) => "invalid_cloud",
            Error::InvalidParams(_) => "invalid_params",
            Error::Config(_) => "config",
            Error::ShapeMismatch { .. } => "shape_mismatch",
            Error::MissingTrackLengths => "missing_track_lengths",
            Error::MissingNormals => "missing_normals",
            Error::Trajectory(_) => "trajectory",
            Error::Diverged { .. } => "diverged",
            Error::Eval(_) => "eval",
            Error::Parse { .. } => "parse",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
