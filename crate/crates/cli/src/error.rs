use std::fmt;
use std::path::Path;

use wirewatch_core::Error;

/// Process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitCode {
    Success = 0,
    Validation = 1,
    Io = 2,
    CheckFailed = 3,
}

#[derive(Debug)]
pub struct CliError {
    pub code: ExitCode,
    pub message: String,
}

impl CliError {
    pub fn validation(message: impl Into<String>) -> Self {
        Self {
            code: ExitCode::Validation,
            message: message.into(),
        }
    }

    pub fn check_failed(message: impl Into<String>) -> Self {
        Self {
            code: ExitCode::CheckFailed,
            message: message.into(),
        }
    }

    /// Wraps a core error raised while handling `path`.
    pub fn at(path: &Path, err: Error) -> Self {
        let mut e = CliError::from(err);
        e.message = format!("{}: {}", path.display(), e.message);
        e
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(err: Error) -> Self {
        // unreadable or malformed input files are I/O failures; bad values are validation failures
        let code = match err {
            Error::Io(_) | Error::Format { .. } => ExitCode::Io,
            _ => ExitCode::Validation,
        };
        Self {
            code,
            message: err.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err).into()
    }
}

pub type CliResult<T> = Result<T, CliError>;
