use thiserror::Error;

/// Failure of a subcommand, grouped by exit status.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Invariant(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Invariant(_) => 3,
        }
    }
}

impl From<cpsnn::Error> for CliError {
    fn from(e: cpsnn::Error) -> Self {
        use cpsnn::Error as E;
        let msg = e.to_string();
        match e {
            E::Config(_) | E::Contract(_) => CliError::Usage(msg),
            E::NonFinite { .. } => CliError::Invariant(msg),
            E::Shape { .. } | E::Parse { .. } | E::FormatVersion { .. } | E::Io(_) | E::Json(_) | E::Csv(_) => {
                CliError::Data(msg)
            }
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
