//! Error type shared across the pipeline.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Error, Debug)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("image error: {0}")]
    Image(#[from] image::ImageError),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("segmentation produced an empty mask (no pixels passed the color filter)")]
    SegmentationEmpty,

    #[error("mask has no foreground pixels")]
    EmptyMask,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: String, got: String },

    #[error("training set is empty")]
    EmptyTrainingSet,

    #[error("descriptor set has no vectors")]
    EmptySample,

    #[error("model file error: {0}")]
    ModelFormat(String),

    #[error("fold {fold}: {source}")]
    Fold {
        fold: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn dim(expected: impl Into<String>, got: impl Into<String>) -> Self {
        Error::Dimension {
            expected: expected.into(),
            got: got.into(),
        }
    }

    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub fn in_fold(self, fold: impl Into<String>) -> Self {
        Error::Fold {
            fold: fold.into(),
            source: Box::new(self),
        }
    }
}
