use thiserror::Error;

/// Library error. The variant decides the CLI exit code.
#[derive(Debug, Error)]
pub enum Error {
    /// An input violated a documented precondition.
    #[error("precondition failed: {0}")]
    Precondition(String),
    /// A numerical procedure did not converge or overflowed.
    #[error("numerical failure: {0}")]
    Numerical(String),
    /// Malformed text input.
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Precondition(_) | Error::Parse(_) => 2,
            Error::Numerical(_) => 3,
            Error::Io(_) | Error::Json(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
