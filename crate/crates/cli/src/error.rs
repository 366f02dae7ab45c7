use std::path::PathBuf;

use qonn_core::QonnError;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),

    #[error("oracle mismatch: {0}")]
    OracleMismatch(String),

    #[error(transparent)]
    Core(#[from] QonnError),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, CliError>;

/// Machine-readable error record written to stderr.
#[derive(Debug, Serialize)]
pub struct ErrorReport {
    pub error: &'static str,
    pub message: String,
    pub exit_code: i32,
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(QonnError::OptimizationFailure(_)) => 3,
            CliError::OracleMismatch(_) => 4,
            _ => 1,
        }
    }

    pub fn category(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::OracleMismatch(_) => "oracle_mismatch",
            CliError::Core(e) => match e {
                QonnError::OptimizationFailure(_) => "optimization_failure",
                QonnError::InvalidArgument(_) => "invalid_argument",
                QonnError::BoundViolation { .. } => "bound_violation",
                QonnError::InternalConsistency(_) => "internal_consistency",
                QonnError::ResourceLimit { .. } => "resource_limit",
                QonnError::DegenerateState { .. } => "degenerate_state",
                QonnError::NoNonlinearRange { .. } => "no_nonlinear_range",
                QonnError::LinearActivation => "linear_activation",
                QonnError::CutoffTooSmall { .. } => "cutoff_too_small",
                QonnError::NonFiniteLoss { .. } => "non_finite_loss",
                QonnError::Dataset { .. } => "dataset",
                QonnError::Io(_) => "io",
            },
            CliError::Io { .. } => "io",
            CliError::Csv(_) => "io",
            CliError::Json(_) => "io",
        }
    }

    pub fn report(&self) -> ErrorReport {
        ErrorReport { error: self.category(), message: self.to_string(), exit_code: self.exit_code() }
    }
}

pub(crate) fn config(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

pub(crate) fn io_at(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
    let path = path.into();
    move |source| CliError::Io { path, source }
}
