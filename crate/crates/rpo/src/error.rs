use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Core(#[from] rpo_core::Error),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{source_name}:{line}: {msg}")]
    Parse { source_name: String, line: usize, msg: String },
    #[error("{0}")]
    Config(String),
    #[error("round-count mismatch: {0}")]
    RoundMismatch(String),
    #[error("no summary files found under {}", .0.display())]
    MissingInputs(PathBuf),
    #[error(transparent)]
    ThreadPool(#[from] rayon::ThreadPoolBuildError),
}

pub type Result<T> = std::result::Result<T, HarnessError>;

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> HarnessError {
    let path = path.into();
    move |source| HarnessError::Io { path, source }
}

pub(crate) fn parse_err(source_name: &str, line: usize, msg: impl Into<String>) -> HarnessError {
    HarnessError::Parse { source_name: source_name.to_string(), line, msg: msg.into() }
}
