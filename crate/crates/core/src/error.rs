use thiserror::Error;

/// Errors raised by distribution evaluation, series, quadrature and fitting.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    /// An argument or parameter lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A series or iteration did not meet its stopping rule.
    #[error("{what} did not converge after {iterations} terms (last term {last_term:e})")]
    Convergence {
        what: String,
        iterations: usize,
        last_term: f64,
    },

    /// A quantity underflowed or overflowed so the result is meaningless.
    #[error("overflow: {0}")]
    Overflow(String),

    /// An integral is divergent or the quadrature could not reach tolerance.
    #[error("integrability error: {0}")]
    Integrability(String),

    /// The optimizer or EM iteration failed; carries the last iterate.
    #[error("fit failed: {reason} (last iterate {last:?}, score {score:?})")]
    Fit {
        reason: String,
        last: [f64; 4],
        score: [f64; 4],
    },

    /// Input data is not a valid lifetime sample.
    #[error("invalid data: {0}")]
    Validation(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
