use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid input: {0}")]
    Validation(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) | CliError::Json(_) => 1,
        }
    }

    /// Short class tag for in-band sweep errors.
    pub fn class(&self) -> String {
        match self {
            CliError::Validation(_) => "validation".into(),
            CliError::Numerical(m) => m.split(':').next().unwrap_or("numerical").to_string(),
            CliError::Io(_) => "io".into(),
            CliError::Json(_) => "json".into(),
        }
    }
}

impl From<rnls_core::Error> for CliError {
    fn from(e: rnls_core::Error) -> Self {
        if e.is_validation() {
            CliError::Validation(e.to_string())
        } else {
            CliError::Numerical(format!("{}: {e}", e.class()))
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(CliError::Validation(msg.into()))
}
