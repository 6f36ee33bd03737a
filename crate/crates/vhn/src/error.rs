use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

pub type Result<T> = std::result::Result<T, VhnError>;

#[derive(Debug, Error)]
pub enum VhnError {
    #[error(transparent)]
    Core(#[from] vhn_core::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Validation(String),
    #[error("audit failed: {0}")]
    AuditFailed(String),
}

/// Process exit codes, a stable contract for scripts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitKind {
    Success = 0,
    Validation = 1,
    Numerical = 2,
    Io = 3,
}

impl VhnError {
    pub fn io(path: impl AsRef<Path>, source: io::Error) -> Self {
        VhnError::Io { path: path.as_ref().to_path_buf(), source }
    }

    pub fn format(path: impl AsRef<Path>, message: impl Into<String>) -> Self {
        VhnError::Format { path: path.as_ref().to_path_buf(), message: message.into() }
    }

    pub fn exit_kind(&self) -> ExitKind {
        use vhn_core::Error as E;
        match self {
            VhnError::Io { .. } | VhnError::Format { .. } => ExitKind::Io,
            VhnError::Core(E::NoConvergence { .. } | E::NotPositiveDefinite(_) | E::NonFinite(_) | E::Disconnected) => ExitKind::Numerical,
            _ => ExitKind::Validation,
        }
    }
}
