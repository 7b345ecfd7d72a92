use thiserror::Error;

/// Errors produced across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {lhs:?} vs {rhs:?} ({context})")]
    Dimension {
        lhs: Vec<usize>,
        rhs: Vec<usize>,
        context: &'static str,
    },

    #[error("index {index} out of range for {what} of size {size}")]
    Index {
        index: usize,
        size: usize,
        what: &'static str,
    },

    #[error("no valid steps")]
    NoValidSteps,

    #[error("non-finite gradient in parameter `{0}`")]
    NonFiniteGradient(String),

    #[error("training diverged (non-finite loss) at epoch {0}")]
    Diverged(usize),

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("{0}")]
    InvalidInput(String),

    #[error("AUC undefined: predictions contain a single class")]
    AucUndefined,

    #[error("dense variant has no discrete representation and cannot be used in downstream tasks")]
    DenseHasNoCodes,

    #[error("vocabulary mismatch at `{0}`")]
    VocabMismatch(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
