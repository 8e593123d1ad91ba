use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the simulation and analysis layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("unsupported spin value {0} (only 1/2 and 1 are supported)")]
    UnsupportedSpin(f64),

    #[error("operator is not Hermitian (relative Frobenius error {0:.3e})")]
    NonHermitian(f64),

    #[error("eigen-solver failure: {0}")]
    EigenSolver(String),

    #[error("tolerance not reached: {0}")]
    ToleranceNotReached(String),

    #[error("decomposition residual {residual:.3e} exceeds tolerance {tolerance:.1e}")]
    DecompositionResidual { residual: f64, tolerance: f64 },

    #[error("field is not perpendicular to group {group} (|cos| = {deviation:.3e})")]
    NotPerpendicular { group: usize, deviation: f64 },

    #[error("rejection sampling gave up after {attempts} attempts ({placed} of {requested} spins placed)")]
    RejectionFailure { attempts: usize, placed: usize, requested: usize },

    #[error("system of {requested} spins exceeds the cap of {cap}")]
    SpinCapExceeded { requested: usize, cap: usize },

    #[error("malformed pulse sequence: {0}")]
    MalformedSequence(String),

    #[error("{path}:{line}: {message}")]
    SequenceParse { path: PathBuf, line: usize, message: String },

    #[error("off-diagonal residual {0:.3e} in averaged coupling tensor")]
    OffDiagonalResidual(f64),

    #[error("fit did not converge: {0}")]
    FitFailed(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("reference signal too small ({value:.3e} at t = {time})")]
    ReferenceTooSmall { value: f64, time: f64 },

    #[error("zero slope at the operating point")]
    ZeroSlope,

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }

    /// True for failures of a numerical method (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::EigenSolver(_)
                | Error::ToleranceNotReached(_)
                | Error::DecompositionResidual { .. }
                | Error::OffDiagonalResidual(_)
                | Error::FitFailed(_)
                | Error::RejectionFailure { .. }
                | Error::ZeroSlope
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
