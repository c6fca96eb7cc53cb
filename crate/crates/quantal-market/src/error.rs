use std::path::Path;

use quantal_market_core::Error as CoreError;

/// Failures of the command-line tool and service, each with an exit status.
#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Core(#[from] CoreError),
    #[error("{source_name}: {message}")]
    Format { source_name: String, message: String },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl AppError {
    pub fn format(source_name: impl Into<String>, message: impl ToString) -> AppError {
        AppError::Format { source_name: source_name.into(), message: message.to_string() }
    }

    pub fn io(path: &Path, source: std::io::Error) -> AppError {
        AppError::Io { path: path.display().to_string(), source }
    }

    /// 1 usage, 2 data or validation, 3 numerical failure.
    pub fn exit_code(&self) -> u8 {
        match self {
            AppError::Usage(_) => 1,
            AppError::Core(e) if e.is_numerical() => 3,
            _ => 2,
        }
    }
}

pub type AppResult<T> = Result<T, AppError>;
