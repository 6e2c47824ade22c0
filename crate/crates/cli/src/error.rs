use std::path::PathBuf;

use floquet_dmft::error::Error as SolverError;

/// Failures of a CLI invocation, each mapped to a process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Solver(#[from] SolverError),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        Self::Config(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    /// 1 for anything the user can fix in the configuration or file system,
    /// 2 for a solver failure during the iteration.
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) | Self::Io { .. } => 1,
            Self::Solver(SolverError::Config { .. } | SolverError::DosTable { .. } | SolverError::Io(_)) => 1,
            Self::Solver(_) => 2,
        }
    }
}
