use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}: {msg}", path.display())]
    Format { path: PathBuf, msg: String },
    #[error("missing input {}; run `{stage}` first", path.display())]
    MissingInput { path: PathBuf, stage: &'static str },
    #[error("{0}")]
    Data(String),
    #[error(transparent)]
    Core(#[from] seq_uq::Error),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn format(path: &Path, msg: impl ToString) -> Self {
        CliError::Format {
            path: path.to_path_buf(),
            msg: msg.to_string(),
        }
    }

    /// 1 for usage errors, 2 for data, I/O and guard errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            _ => 2,
        }
    }
}
