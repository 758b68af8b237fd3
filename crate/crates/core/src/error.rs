use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the scanning pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("image size overflow: {width}x{height}")]
    SizeOverflow { width: u64, height: u64 },
    #[error("truncated payload: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },

    #[error("invalid document: {0}")]
    Schema(String),
    #[error("missing field `{0}`")]
    MissingField(String),
    #[error("value out of range: {0}")]
    OutOfRange(String),
    #[error("rotation is not orthonormal (deviation {deviation:.3e})")]
    NonOrthonormal { deviation: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid pattern spec: {0}")]
    InvalidPattern(String),
    #[error("incomplete capture stack: {0}")]
    IncompleteStack(String),

    #[error("point at or behind the sensor (depth {0})")]
    NonPositiveDepth(f64),
    #[error("undistortion failed to converge after {0} iterations")]
    UndistortDiverged(usize),
    #[error("degenerate configuration: {0}")]
    Degenerate(String),
    #[error("rays are parallel")]
    ParallelRays,
    #[error("insufficient data: {0}")]
    Insufficient(String),
    #[error("image of absolute conic is not positive definite")]
    NotPositiveDefinite,
    #[error("board is behind the sensor for both homography signs")]
    BoardBehindSensor,
    #[error("no valid neighbors around pixel ({0:.2}, {1:.2})")]
    NoValidNeighbors(f64, f64),
    #[error("unknown point `{0}`")]
    UnknownPoint(String),
    #[error("zero mean for length `{0}`")]
    ZeroMean(String),
}

/// Coarse failure class, used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Data,
    Numerical,
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::NonPositiveDepth(_)
            | Error::UndistortDiverged(_)
            | Error::Degenerate(_)
            | Error::ParallelRays
            | Error::NotPositiveDefinite
            | Error::BoardBehindSensor
            | Error::NoValidNeighbors(..)
            | Error::ZeroMean(_) => ErrorClass::Numerical,
            _ => ErrorClass::Data,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
