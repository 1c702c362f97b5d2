use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("{what} did not converge after {iterations} iterations")]
    NoConvergence { what: &'static str, iterations: usize },

    #[error("insufficient quadrature resolution: {0}")]
    Resolution(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("degenerate recurrence row {row} ({kind}); use the degenerate-case construction")]
    Degenerate { row: usize, kind: String },

    #[error("invalid state: {0}")]
    State(String),

    #[error("overflow in {0}")]
    Overflow(&'static str),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn is_unsupported(&self) -> bool {
        matches!(self, Error::Unsupported(_) | Error::Degenerate { .. })
    }
}
