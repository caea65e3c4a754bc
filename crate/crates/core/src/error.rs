use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the fall-detection workbench.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite generalized state")]
    NonFiniteState,

    #[error("integration diverged at t = {t:.4} s{}", trajectory.map(|id| format!(" (trajectory {id})")).unwrap_or_default())]
    IntegrationDiverged { t: f64, trajectory: Option<u64> },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid robot parameters: {0}")]
    InvalidParams(String),

    #[error("range calibration failed: {0}")]
    CalibrationFailed(String),

    #[error("unknown feature set `{0}`")]
    UnknownFeatureSet(String),

    #[error("degenerate series: need at least 2 samples, got {0}")]
    DegenerateSeries(usize),

    #[error("training lead time {0} s outside [0, 2] s")]
    LeadTimeOutOfRange(f64),

    #[error("too few trajectories in stratum {stratum}: {count} < {folds} folds")]
    TooFewTrajectories {
        stratum: String,
        count: usize,
        folds: usize,
    },

    #[error("correlation matrix is singular after regularization")]
    SingularR,

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("SMO did not converge after {iterations} iterations (KKT violation {violation:.3e})")]
    NoConvergence { iterations: usize, violation: f64 },

    #[error("no training lead time meets the rate bounds")]
    NoFeasibleLeadTime,

    #[error("artifact hash mismatch: {0}")]
    HashMismatch(String),

    #[error("malformed file {path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::Format {
            path: path.into(),
            message: message.to_string(),
        }
    }
}
