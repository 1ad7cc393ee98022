use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    /// `exp(exponent)` would overflow an f64.
    #[error("exponential overflow: exponent {exponent} (shift the spectrum first)")]
    Overflow { exponent: f64 },

    #[error("dimension {required} exceeds the configured cap {cap}")]
    DimensionCap { required: usize, cap: usize },

    /// Adaptive quadrature ran out of subdivisions; the best estimate is kept.
    #[error(
        "quadrature did not converge after {subdivisions} subdivisions \
         (estimate {estimate}, error {error_estimate})"
    )]
    QuadratureFailed {
        estimate: f64,
        error_estimate: f64,
        subdivisions: usize,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
