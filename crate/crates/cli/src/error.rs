use std::path::{Path, PathBuf};

use thiserror::Error;

/// Failures surfaced to the shell, each with a fixed exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),

    #[error("{}:{line}: {message}", path.display())]
    Parse { path: PathBuf, line: usize, message: String },

    #[error("{}: {message}", path.display())]
    Schema { path: PathBuf, message: String },

    #[error("{0}")]
    Numeric(String),

    #[error("{}: {message}", path.display())]
    Io { path: PathBuf, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Parse { .. } | CliError::Schema { .. } => 3,
            CliError::Numeric(_) => 4,
            CliError::Io { .. } => 1,
        }
    }

    pub fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError::Io { path: path.to_path_buf(), message: e.to_string() }
    }

    /// Attaches a file name to a library error.
    pub fn in_file(path: &Path, e: dctrw::error::Error) -> Self {
        match e {
            dctrw::error::Error::Parse { line, message } => CliError::Parse { path: path.to_path_buf(), line, message },
            other => other.into(),
        }
    }
}

impl From<dctrw::error::Error> for CliError {
    fn from(e: dctrw::error::Error) -> Self {
        use dctrw::error::Error as E;
        match e {
            E::InvalidModel(_) | E::InvalidArgument(_) | E::Domain(_) => CliError::Validation(e.to_string()),
            E::Parse { line, message } => CliError::Parse { path: PathBuf::from("<input>"), line, message },
            E::Io(message) => CliError::Io { path: PathBuf::from("<input>"), message },
            E::Pole(_) | E::Convergence { .. } | E::MethodFailure(_) | E::Numeric(_) | E::Estimation(_) | E::Fit(_) => {
                CliError::Numeric(e.to_string())
            }
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
