use thiserror::Error;

/// Errors raised anywhere in the pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite argument: {0}")]
    NonFinite(&'static str),

    #[error("derivative order m={m}, n={n} not supported (max total order {max})")]
    UnsupportedOrder { m: usize, n: usize, max: usize },

    #[error("matrix is singular or not positive definite: {0}")]
    Singular(String),

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("continuous-support minimizer detected: {0}")]
    Degenerate(String),

    #[error("nonpositive component theta[{index}] = {value:e}; support is not optimal")]
    NonPositiveTheta { index: usize, value: f64 },

    #[error("no sign change of the defining equation in [{lo}, {hi}]")]
    NoBracket { lo: f64, hi: f64 },

    #[error("asymptotic constant unavailable: condition mu''>0 fails at an interior support point; only P = o(u^-{k} exp(-u^2/(2 V*))) holds")]
    UpperBoundOnly { k: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
