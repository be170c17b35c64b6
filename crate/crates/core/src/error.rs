use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid network spec: {0}")]
    InvalidSpec(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite activation in layer {layer}")]
    NumericOverflow { layer: usize },

    #[error("training diverged at iteration {iteration}")]
    Diverged { iteration: usize },

    #[error("IDX parse error at byte offset {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("container error: {0}")]
    Container(String),

    #[error("checksum mismatch in {0}")]
    Checksum(String),

    #[error("container version {found} not supported (expected {supported})")]
    Version { found: u32, supported: u32 },

    #[error("expected a container of kind `{expected}`, found `{found}`")]
    Kind { expected: String, found: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
