use std::path::{Path, PathBuf};

/// Failures of a CLI run, each mapped to an exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cache file {path} is invalid ({reason}); rerun with --force to recompute")]
    CacheInvalid { path: PathBuf, reason: String },
    #[error(transparent)]
    Numeric(#[from] ostwave::Error),
    #[error("{failed} of {total} records failed their checks")]
    ChecksFailed { failed: usize, total: usize },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// 0 success, 1 numeric failure, 2 configuration or IO error.
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Numeric(_) | Self::ChecksFailed { .. } => 1,
            Self::Config(_) | Self::Io { .. } | Self::CacheInvalid { .. } => 2,
        }
    }
}
