use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the tracking stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("point depth {0} is not positive")]
    DegenerateDepth(f64),
    #[error("stereo disparity {0} px is not positive")]
    NonPositiveDisparity(f64),
    #[error("stereo disparity {disparity} px is below the reliability floor {min} px")]
    DisparityTooSmall { disparity: f64, min: f64 },
    #[error("frame {width}x{height} is too small for a {levels}-level pyramid")]
    PyramidTooDeep {
        width: usize,
        height: usize,
        levels: usize,
    },
    #[error("geometry mismatch: {0}")]
    GeometryMismatch(String),
    #[error("need at least {needed} tracked points, got {got}")]
    InsufficientPoints { needed: usize, got: usize },
    #[error("need at least {needed} observed points per eye, got {got}")]
    InsufficientObservations { needed: usize, got: usize },
    #[error("hypothesis set has not been scored")]
    NotScored,
    #[error("time {t} s is outside [0, {duration}] s")]
    OutOfRange { t: f64, duration: f64 },
    #[error("object model has no points")]
    EmptyModel,
    #[error("sequence is empty")]
    EmptySequence,
    #[error("trace has {trace} frames but the dataset has {dataset}")]
    LengthMismatch { trace: usize, dataset: usize },
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("parse error in {path}: {msg}")]
    Parse { path: PathBuf, msg: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the command-line tool: 2 for configuration and
    /// dataset problems, 3 for evaluation mismatches, 4 for invariant violations.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::LengthMismatch { .. } => 3,
            Error::Invariant(_) => 4,
            _ => 2,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            msg: msg.into(),
        }
    }
}
