use thiserror::Error;

/// Errors raised by the solver pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("linear solve failed at time step {step}: {reason}")]
    Solver { step: usize, reason: String },

    #[error("integrity violation: {0}")]
    Integrity(String),

    #[error(
        "fixed-point iteration did not converge after {iterations} iterations (last residual {last:.3e})"
    )]
    NoConvergence {
        iterations: usize,
        last: f64,
        history: Vec<f64>,
    },

    #[error("wealth {x} at t={t} is outside the covered range [{lo}, {hi}]; widen the y-grid")]
    OutOfRange { t: f64, x: f64, lo: f64, hi: f64 },

    #[error("grid coverage: {flagged} of {total} paths left [y_min, y_max]; widen the y-grid")]
    Coverage { flagged: usize, total: usize },

    #[error("config: {0}")]
    Config(String),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
