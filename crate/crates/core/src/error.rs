use thiserror::Error;

/// Errors raised by the resonator-chain solvers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    Validation(String),

    #[error("modulation lost positivity: {what} = {value:e} at t = {t}")]
    SingularModulation { what: String, t: f64, value: f64 },

    #[error("integration did not reach |det - 1| < {tolerance:e} within {steps} steps (last deviation {deviation:e})")]
    IntegrationAccuracy {
        steps: usize,
        deviation: f64,
        tolerance: f64,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("{0}")]
    Misuse(String),

    #[error("operator is nearly singular at quadrature node alpha = {alpha} (pivot {pivot:e})")]
    NearSingular { alpha: f64, pivot: f64 },

    #[error("root search failed after {iterations} iterations (residual {residual:e})")]
    RootFailure { iterations: usize, residual: f64 },

    #[error("at alpha = {alpha}: {source}")]
    AtAlpha {
        alpha: f64,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::Validation(msg.into())
}
