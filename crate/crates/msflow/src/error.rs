use std::io;
use std::path::Path;

/// File and format errors.
#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{0}")]
    Io(#[from] io::Error),
    #[error("{0}")]
    Parse(String),
}

impl IoError {
    pub fn at(path: &Path, e: io::Error) -> Self {
        IoError::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    }

    /// Prefixes the message with `path`.
    pub fn in_file(self, path: &Path) -> Self {
        match self {
            IoError::Io(e) => IoError::at(path, e),
            IoError::Parse(m) => IoError::Parse(format!("{}: {m}", path.display())),
        }
    }
}

/// Everything the command line can fail with. Each class maps to its own
/// process exit code.
#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("io: {0}")]
    Io(io::Error),
    #[error("format: {0}")]
    Parse(String),
    #[error("fit: {0}")]
    Fit(String),
    #[error("{0}")]
    Core(msflow_core::Error),
}

impl AppError {
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Usage(_) => 2,
            AppError::Io(_) => 3,
            AppError::Parse(_) => 4,
            AppError::Core(_) => 5,
            AppError::Fit(_) => 6,
        }
    }
}

impl From<IoError> for AppError {
    fn from(e: IoError) -> Self {
        match e {
            IoError::Io(e) => AppError::Io(e),
            IoError::Parse(m) => AppError::Parse(m),
        }
    }
}

impl From<msflow_core::Error> for AppError {
    fn from(e: msflow_core::Error) -> Self {
        match e {
            msflow_core::Error::Fit(m) => AppError::Fit(m),
            other => AppError::Core(other),
        }
    }
}

impl From<io::Error> for AppError {
    fn from(e: io::Error) -> Self {
        AppError::Io(e)
    }
}
