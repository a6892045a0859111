use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration:\n{0}")]
    Validation(String),
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("budget exceeded: {0}")]
    Budget(String),
    #[error(transparent)]
    Core(#[from] fbm_pv::Error),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl HarnessError {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Validation(_) | HarnessError::Core(_) => 2,
            HarnessError::Verification(_) => 3,
            HarnessError::Budget(_) => 4,
            HarnessError::Io(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
