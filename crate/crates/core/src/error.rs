use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("desk-scale cap exceeded: {0}")]
    CapExceeded(String),
    #[error("undecidable at this scale; use witnesses")]
    Undecidable,
    #[error("operation does not respect the number superselection rule: {0}")]
    NotSsrRespecting(String),
    #[error("truncation insufficient: retained Poisson mass {retained:.3e} below {required:.3e}")]
    Truncation { retained: f64, required: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by the caller's data rather than the environment.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
