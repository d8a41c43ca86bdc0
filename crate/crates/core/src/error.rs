use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the library. The CLI maps each variant onto an exit code.
#[derive(Debug, Error)]
pub enum Error {
    #[error("corpus contains no tokens")]
    EmptyCorpus,

    #[error("sentence has no tokens after tokenization")]
    EmptySentence,

    #[error("dimension mismatch: {0}")]
    DimMismatch(String),

    #[error("trace does not match sequence: {0}")]
    TraceMismatch(String),

    #[error("vector norm is zero (or below 1e-12)")]
    ZeroNorm,

    #[error("corpus has {distinct} distinct documents, need more than {requested}")]
    CorpusTooSmall { distinct: usize, requested: usize },

    #[error("invalid synthetic corpus spec: {0}")]
    SpecInvalid(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("invalid checkpoint {path}: {message}")]
    Checkpoint { path: PathBuf, message: String },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn parse(path: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}

/// Opens `path` for reading; the error names the file.
pub fn open(path: &std::path::Path) -> Result<std::fs::File> {
    std::fs::File::open(path).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })
}
