use thiserror::Error;

/// Errors produced by the numerical layers and the report front end.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter is outside the admissible domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A computation produced a nonfinite or otherwise unusable value.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// Rule-doubling did not reach the requested relative agreement.
    #[error(
        "quadrature did not converge below the size cap: last values {prev:e} and {last:e} \
         (relative change {rel:e})"
    )]
    QuadratureNotConverged { prev: f64, last: f64, rel: f64 },

    /// Invalid experiment configuration (file or flags).
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }
}
