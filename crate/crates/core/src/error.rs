use std::path::PathBuf;

use crate::flows::Trajectory;
use crate::geometry::Point;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    /// An iterative solver stopped without certifying its answer.
    #[error("solver failure: {message} (certificate gap {gap:e})")]
    SolverFailure {
        message: String,
        best: Option<Box<Point>>,
        gap: f64,
    },

    /// A declared bound was violated by a sampled witness.
    #[error("certification failure: {0}")]
    Certification(String),

    /// A multi-step run stopped early; the completed prefix is kept.
    #[error("run failed at step {step}: {source}")]
    PartialRun {
        step: usize,
        trajectory: Box<Trajectory>,
        #[source]
        source: Box<Error>,
    },

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("{path}: line {line}: {message}")]
    Ingest {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn unsupported(msg: impl Into<String>) -> Self {
        Error::Unsupported(msg.into())
    }

    pub(crate) fn solver(msg: impl Into<String>, best: Option<Point>, gap: f64) -> Self {
        Error::SolverFailure {
            message: msg.into(),
            best: best.map(Box::new),
            gap,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
