use std::path::{Path, PathBuf};

/// Everything that maps to exit code 1.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad scenario file, preset name or override.
    #[error("{0}")]
    Config(String),
    /// Rejected by the core library.
    #[error(transparent)]
    Core(#[from] transhape_core::Error),
    /// File system failure.
    #[error("{}: {source}", path.display())]
    Io {
        /// Offending path.
        path: PathBuf,
        /// Underlying error.
        source: std::io::Error,
    },
}

impl CliError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }
}

/// Result alias for the command layer.
pub type Result<T> = std::result::Result<T, CliError>;
