use std::path::{Path, PathBuf};

/// Errors surfaced by the command-line layer, each mapped to an exit code.
#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("{0}")]
    Usage(String),

    #[error("{path}: {message}")]
    Schema { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] hscm_core::Error),
}

impl AppError {
    pub fn schema(path: &Path, message: impl Into<String>) -> Self {
        AppError::Schema {
            path: path.to_path_buf(),
            message: message.into(),
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        AppError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// 2 for usage and schema problems, 3 when estimation itself fails.
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Core(hscm_core::Error::Estimation(_) | hscm_core::Error::Fit { .. }) => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, AppError>;
