use std::path::PathBuf;
use std::process::ExitCode;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] tvgc_core::Error),
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Artifact { path: PathBuf, message: String },
    #[error("numerical failures at {failed} of {total} endpoints (limit 10%)")]
    FailureDensity { failed: usize, total: usize },
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Self {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }

    /// 2 for invalid or insufficient input, 3 for numerical failure, 1 otherwise.
    pub fn exit_code(&self) -> ExitCode {
        use tvgc_core::Error as E;
        let code = match self {
            CliError::Usage(_) | CliError::Artifact { .. } => 2,
            CliError::FailureDensity { .. } => 3,
            CliError::Io { .. } => 1,
            CliError::Core(e) if e.is_numerical() => 3,
            CliError::Core(E::BootstrapDiscards { .. }) => 3,
            CliError::Core(E::Io(_)) => 1,
            CliError::Core(_) => 2,
        };
        ExitCode::from(code)
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
