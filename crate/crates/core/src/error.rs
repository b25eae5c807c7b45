use thiserror::Error;

/// Errors raised by the dynamics, analysis and simulation layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("eigenvalue {lambda} is negative")]
    NegativeEigenvalue { lambda: f64 },

    #[error("eta * lambda = {product} exceeds 1; the inner loop would not contract")]
    StepTooLarge { product: f64 },

    #[error("non-finite state at round {round}")]
    Divergence { round: usize },

    #[error("outer step produced a non-finite state")]
    NonFiniteStep,

    #[error("overshoot regime: determinant {det} is not positive")]
    Overshoot { det: f64 },

    #[error("operation requires the complex-conjugate regime, found {found}")]
    NotComplexRegime { found: &'static str },

    #[error("spectrum is empty or carries no weight")]
    EmptySpectrum,

    #[error("schedule `{schedule}` is not supported here: {reason}")]
    UnsupportedSchedule { schedule: &'static str, reason: String },

    #[error("matrix is not symmetric positive semidefinite: {reason}")]
    NotPsd { reason: String },

    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
