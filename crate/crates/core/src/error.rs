//! Error type shared by every module of the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("time {t} outside [0, {t_final}]")]
    TimeOutOfRange { t: f64, t_final: f64 },

    #[error("field is not divergence free (max |div| = {max_div:e})")]
    NotSolenoidal { max_div: f64 },

    #[error("{solver} did not converge after {iterations} iterations (relative residual {residual:e})")]
    NoConvergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("time step {step}: {message}")]
    StepFailure { step: usize, message: String },

    #[error("advective CFL bound violated: dt = {dt:e}, required dt <= {required:e}")]
    Cfl { dt: f64, required: f64 },

    #[error("model breakdown: {0}")]
    ModelBreakdown(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("Picard iteration diverged after {} iterations (residuals: {history:?})", history.len())]
    PicardDivergence { history: Vec<f64> },

    #[error("instance too large for the dense oracle: {unknowns} unknowns (limit {limit})")]
    TooLarge { unknowns: usize, limit: usize },

    #[error("{phase}: {source}")]
    Phase {
        phase: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Wraps an error with the name of the pipeline phase that produced it.
    pub fn in_phase(self, phase: &'static str) -> Self {
        Error::Phase {
            phase,
            source: Box::new(self),
        }
    }

    /// Innermost error, with phase wrappers removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::Phase { source, .. } => source.root(),
            other => other,
        }
    }
}
