use thiserror::Error;

/// Errors raised by the engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("argument {value} outside domain {domain}")]
    Domain { value: f64, domain: &'static str },

    #[error("matrix decomposition failed: {0}")]
    Decomposition(String),

    #[error("degenerate conditioning: observed value {value} sits where the marginal CDF is {cdf}")]
    DegenerateConditioning { value: f64, cdf: f64 },

    #[error("degenerate posterior: every importance weight vanished for observation {observation}")]
    DegeneratePosterior { observation: f64 },

    #[error("empty sample set")]
    EmptySamples,

    #[error("{degenerate} of {total} outer draws had degenerate posteriors (limit {limit})")]
    TooManyDegenerateDraws { degenerate: usize, total: usize, limit: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
