use thiserror::Error;

/// Errors produced anywhere in the numerical pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A model or solver parameter is outside its allowed range.
    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    /// User supplied data (points, curves, configs) failed validation.
    #[error("validation failed: {0}")]
    Validation(String),

    /// The computed spectrum does not reach far enough to bound a truncated sum.
    #[error("insufficient spectrum: {0}")]
    InsufficientSpectrum(String),

    /// A request would exceed a configured safety cap.
    #[error("resource limit exceeded: {0}")]
    Resource(String),

    /// The argument lies outside the domain where the quantity is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// A least-squares fit could not be performed.
    #[error("fit failed: {0}")]
    Fit(String),

    /// An improper integral does not converge.
    #[error("divergent integral: {0}")]
    Divergent(String),

    /// An iterative solver failed to reach its tolerance.
    #[error("no convergence: {0}")]
    Convergence(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Parameter {
            name,
            reason: reason.into(),
        }
    }
}

/// Checks `value > 0` and finite.
pub(crate) fn require_positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be positive and finite, got {value}")))
    }
}
