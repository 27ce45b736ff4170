use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("data: {0}")]
    Data(String),
    #[error("fit: {0}")]
    Fit(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => 2,
            Self::Data(_) | Self::Io(_) => 3,
            Self::Fit(_) => 4,
        }
    }
}

impl From<tailblend::Error> for CliError {
    fn from(e: tailblend::Error) -> Self {
        use tailblend::Error as E;
        match e {
            E::Argument(_) => Self::Usage(e.to_string()),
            E::Fit(_) | E::DegenerateComponent { .. } => Self::Fit(e.to_string()),
            _ => Self::Data(e.to_string()),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        Self::Data(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self::Data(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
