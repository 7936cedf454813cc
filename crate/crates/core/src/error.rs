use thiserror::Error;

/// Errors raised anywhere in the library. Messages are prefixed with the
/// module that raised them so CLI output stays attributable.
#[derive(Debug, Error)]
pub enum Error {
    /// A precondition or invariant on the inputs was violated.
    #[error("{module}: {message}")]
    Domain {
        module: &'static str,
        message: String,
    },

    /// An adaptive rule ran out of subdivisions before meeting its tolerance.
    #[error("quadrature: no convergence after {subdivisions} subdivisions (estimate {estimate:e}, error {error:e})")]
    Convergence {
        subdivisions: usize,
        estimate: f64,
        error: f64,
    },

    /// A simulated path produced a non-finite or runaway value.
    #[error("solver: blow-up on path {path} at step {step} (|u| = {magnitude:e})")]
    BlowUp {
        path: u64,
        step: usize,
        magnitude: f64,
    },

    /// Fixed-point iteration distances grew three times in a row.
    #[error("solver: picard iteration diverging (distances {distances:?})")]
    PicardDivergence { distances: Vec<f64> },

    /// A regression had too few usable points or non-positive data.
    #[error("estimators: degenerate fit: {0}")]
    DegenerateFit(String),
}

impl Error {
    pub(crate) fn domain(module: &'static str, message: impl Into<String>) -> Self {
        Error::Domain {
            module,
            message: message.into(),
        }
    }

    /// True for errors caused by bad inputs rather than numerical failure.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Domain { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
