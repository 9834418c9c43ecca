use std::process::ExitCode;

use csikit_core::error::CsiError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Io(_) => ExitCode::from(1),
            CliError::Data(_) => ExitCode::from(2),
            CliError::Usage(_) => ExitCode::from(64),
        }
    }

    pub fn missing(flag: &str) -> Self {
        CliError::Usage(format!("missing required argument {flag}"))
    }
}

impl From<CsiError> for CliError {
    fn from(e: CsiError) -> Self {
        if e.is_io() {
            CliError::Io(e.to_string())
        } else {
            CliError::Data(e.to_string())
        }
    }
}

pub fn write_err(path: &std::path::Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}
