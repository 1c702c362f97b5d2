use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("verification failed: {0}")]
    Verification(String),

    #[error(transparent)]
    Core(#[from] lemnis::Error),
}

impl CliError {
    /// 0 ok, 2 usage, 3 verification failure, 4 unsupported regime, 1 other.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Verification(_) => 3,
            CliError::Unsupported(_) => 4,
            CliError::Core(e) => match e {
                lemnis::Error::InvalidParam(_) | lemnis::Error::Domain(_) => 2,
                e if e.is_unsupported() => 4,
                _ => 1,
            },
        }
    }
}
