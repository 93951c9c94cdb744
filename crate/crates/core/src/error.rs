use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: expected {expected}, got {got}")]
    ShapeMismatch {
        op: &'static str,
        expected: String,
        got: String,
    },

    #[error("{0}: empty input")]
    EmptyInput(&'static str),

    #[error("label {label} out of range for {n_classes} classes")]
    LabelOutOfRange { label: usize, n_classes: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("correlation undefined: {0} is constant")]
    ConstantInput(&'static str),

    #[error("training diverged (non-finite loss) with l2 = {lambda}")]
    Diverged { lambda: f64 },

    #[error("cosine similarity undefined: zero embedding for sentence {sentence:?}")]
    ZeroVector { sentence: String },

    #[error("{}:{line}: {msg}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("{}: {msg}", path.display())]
    Data { path: PathBuf, msg: String },

    #[error("invalid UTF-8 at byte offset {offset}")]
    Encoding { offset: usize },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("encoder error: {0}")]
    Encoder(String),

    #[error("encoder protocol error: {0}")]
    Protocol(String),

    #[error("encoder process exited ({status}); stderr tail:\n{stderr}")]
    ChildExit { status: String, stderr: String },

    #[error("encoder timed out after {0:?}")]
    Timeout(std::time::Duration),

    #[error("unknown task {name:?}; valid tasks: {valid}")]
    UnknownTask { name: String, valid: String },
}

impl Error {
    pub(crate) fn shape(op: &'static str, expected: impl ToString, got: impl ToString) -> Self {
        Error::ShapeMismatch {
            op,
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
