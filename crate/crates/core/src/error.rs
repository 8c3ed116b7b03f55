//! Error type shared across the crate.

use std::path::PathBuf;
use thiserror::Error;

/// Errors produced by geometry, synthesis, feature and grouping operations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("PLY parse error at line {line}: {message}")]
    PlyParse { line: usize, message: String },

    #[error("PLY schema error: {message}")]
    PlySchema { message: String },

    #[error("feature sidecar format error: {0}")]
    SidecarFormat(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("degenerate sample: source points are collinear or coincident")]
    DegenerateSample,

    #[error("degenerate local reference frame: neighborhood has rank < 2")]
    DegenerateFrame,

    #[error("downsampling removed every point")]
    DegenerateOutput,

    #[error("no consensus: every sampled subset was degenerate")]
    NoConsensus,

    #[error("scene has {0} descriptors, need at least 2 for ratio matching")]
    InsufficientFeatures(usize),

    #[error("k = {k} exceeds cloud size {size}")]
    KnnOutOfBounds { k: usize, size: usize },

    #[error("missing local reference frame for point ids {0:?}")]
    MissingLrf(Vec<usize>),

    #[error("invalid parameter `{name}`: {message}")]
    InvalidParameter { name: String, message: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("contract violation: {0}")]
    ContractViolation(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid_parameter(name: &str, message: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.to_string(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
