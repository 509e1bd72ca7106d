use std::fmt::Display;

/// Failure classes, each with its own process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Precondition(String),
    #[error("{0}")]
    Numerical(String),
    #[error("{0}")]
    Certificate(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Precondition(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Certificate(_) => 4,
        }
    }

    pub fn precondition(e: impl Display) -> Self {
        CliError::Precondition(e.to_string())
    }
}

impl From<mlab_core::Error> for CliError {
    fn from(e: mlab_core::Error) -> Self {
        use mlab_core::Error as E;
        match e {
            E::Numerical(_) | E::UnderResolvedSpectrum { .. } | E::Infeasible(_) => CliError::Numerical(e.to_string()),
            _ => CliError::Precondition(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Precondition(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Precondition(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Precondition(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
