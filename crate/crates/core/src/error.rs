use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Domain(String),

    #[error("invalid model: {0}")]
    Model(String),

    #[error("quadrature did not converge: value {value:e}, error estimate {error:e} after {intervals} intervals")]
    Quadrature { value: f64, error: f64, intervals: usize },

    #[error("series did not converge after {terms} terms at x = {x:e}")]
    Series { x: f64, terms: usize },

    #[error("root finding failed: {0}")]
    Root(String),

    #[error("grid mismatch: {0}")]
    Grid(String),

    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
