use std::io;
use std::path::PathBuf;

/// Failures of the command-line tool. Usage errors exit with 1, everything
/// else with 2.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{0}")]
    Usage(String),

    #[error("{}: {source}", path.display())]
    Open { path: PathBuf, source: io::Error },

    #[error("line {line}: {source}")]
    Read { line: u64, source: io::Error },

    #[error("line {line}: invalid UTF-8")]
    Utf8 { line: u64 },

    #[error("write failed: {0}")]
    Write(#[source] io::Error),

    #[error("{}:{line}: {msg}", path.display())]
    Format {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("line {line}: {source}")]
    Line { line: u64, source: subseg::Error },

    #[error(transparent)]
    Core(#[from] subseg::Error),
}

impl Error {
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 1,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
