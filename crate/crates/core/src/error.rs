use thiserror::Error;

#[derive(Debug, Error)]
pub enum QonnError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("squeezing {value} on mode {mode} exceeds the bound |r| <= {bound}")]
    BoundViolation { mode: usize, value: f64, bound: f64 },

    #[error("internal consistency check failed: {0}")]
    InternalConsistency(String),

    #[error("sequence length {length} exceeds the matching cap {cap} ({predicted} matchings predicted)")]
    ResourceLimit { length: usize, cap: usize, predicted: u128 },

    #[error("degenerate state: herald norm {norm:e} is below {threshold:e}")]
    DegenerateState { norm: f64, threshold: f64 },

    #[error("no nonlinear range: eps = {eps} is not below tau_r(0) = {tau0}")]
    NoNonlinearRange { eps: f64, tau0: f64 },

    #[error("degenerate activation: r = 0 gives a linear map")]
    LinearActivation,

    #[error("Fock cutoff {cutoff} too small: leakage {leakage:e} > {threshold:e}; try cutoff >= {suggested}")]
    CutoffTooSmall { cutoff: usize, leakage: f64, threshold: f64, suggested: usize },

    #[error("non-finite loss while probing parameter {coordinate}")]
    NonFiniteLoss { coordinate: usize },

    #[error("optimization failed: {0}")]
    OptimizationFailure(String),

    #[error("dataset error at row {row}: {message}")]
    Dataset { row: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, QonnError>;

pub(crate) fn invalid(msg: impl Into<String>) -> QonnError {
    QonnError::InvalidArgument(msg.into())
}
