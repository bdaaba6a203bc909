use std::io;
use std::path::PathBuf;

use dynelab_core::DyneError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("cannot parse config: {0}")]
    Parse(String),

    #[error("invalid config key `{key}`: {reason}")]
    Invalid { key: String, reason: String },

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },

    #[error("serialization failed for {}: {reason}", path.display())]
    Serialize { path: PathBuf, reason: String },

    #[error("simulation failed: {0}")]
    Simulation(#[from] DyneError),

    #[error("{count} ensemble-level error(s), recorded in the manifest")]
    EnsembleFailures { count: usize },
}

impl HarnessError {
    pub fn invalid(key: impl Into<String>, reason: impl Into<String>) -> Self {
        HarnessError::Invalid {
            key: key.into(),
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        HarnessError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status: 1 for configuration problems, 2 for everything at run time.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Parse(_) | HarnessError::Invalid { .. } => 1,
            _ => 2,
        }
    }
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;
