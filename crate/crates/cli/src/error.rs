use std::io;
use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad configuration. `location` is `file:line` when the key could be found.
    #[error("{location}: {message}")]
    Config { location: String, message: String },

    #[error(transparent)]
    Core(#[from] bragg_core::Error),

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },

    #[error("{0} validation check(s) failed")]
    ChecksFailed(usize),
}

impl CliError {
    /// 1 for validation failures, 2 for I/O errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } => 2,
            CliError::Core(bragg_core::Error::Io(_) | bragg_core::Error::Csv(_)) => 2,
            _ => 1,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
