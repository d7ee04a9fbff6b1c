use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("resolution too small: {direction} has {value} subdivisions, periodic directions need at least 3")]
    ResolutionTooSmall { direction: &'static str, value: usize },

    #[error("resolution {nx}x{ny} overflows the node index type")]
    ResolutionOverflow { nx: usize, ny: usize },

    #[error("invalid resolution {nx}x{ny}: both must be at least 1")]
    InvalidResolution { nx: usize, ny: usize },

    #[error("degenerate element {triangle}: det(g) = {det:e}")]
    DegenerateElement { triangle: usize, det: f64 },

    #[error("mesh mismatch: {0}")]
    MeshMismatch(String),

    #[error("dimension mismatch: expected {expected} nodes, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("linear solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    SolverNotConverged { iterations: usize, residual: f64 },

    #[error("geodesic integration failed at step {step}: {source}")]
    StepFailure {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("zero velocity: the angle is undefined")]
    ZeroVelocity,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the numerics (as opposed to input or I/O problems).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::DegenerateElement { .. }
                | Error::SolverNotConverged { .. }
                | Error::StepFailure { .. }
                | Error::ZeroVelocity
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
