use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite rating {value} at position {position}")]
    NonFiniteRating { position: usize, value: f64 },

    #[error("unknown user id {0}")]
    UnknownUser(u32),

    #[error("unknown item id {0}")]
    UnknownItem(u32),

    #[error("unknown user token {0:?}")]
    UnknownUserToken(String),

    #[error("unknown item token {0:?}")]
    UnknownItemToken(String),

    #[error("ratings matrix is empty; the global mean is undefined")]
    EmptyMatrix,

    #[error("ratings matrix has no users")]
    NoUsers,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch on row {row}: expected {expected} values, found {found}")]
    DimensionMismatch { row: String, expected: usize, found: usize },

    #[error("training diverged at epoch {epoch} (loss {loss}); try a smaller learning_rate")]
    Diverged { epoch: usize, loss: f64 },

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("split produced an empty {0} set")]
    EmptySplit(&'static str),

    #[error("test set is empty")]
    EmptyTestSet,
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
