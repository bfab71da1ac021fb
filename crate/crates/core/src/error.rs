//! Crate-wide error type.

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("uncovered output pixel at ({row}, {col}); choose anchors/stride that cover the extent")]
    CoverageGap { row: usize, col: usize },

    #[error("corrupt weight file: {0}")]
    CorruptWeights(String),

    #[error("base weights unavailable: {0}")]
    MissingWeights(String),

    #[error("invalid annotation: {0}")]
    InvalidAnnotation(String),

    #[error("iris codes share no valid bits at any shift")]
    Incomparable,

    #[error("model has not been trained")]
    NotTrained,

    #[error("corpus error: {0}")]
    Corpus(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("image file {path}: {source}")]
    ImageFile {
        path: PathBuf,
        source: image::ImageError,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn invalid<S: Into<String>>(msg: S) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
