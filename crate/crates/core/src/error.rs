//! Error type shared across the crate.

use crate::dataset::{ItemId, UserId};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: malformed line: {detail}")]
    Parse {
        path: String,
        line: usize,
        detail: String,
    },

    #[error("{path}:{line}: rating {value} outside 1..={max}")]
    RatingOutOfRange {
        path: String,
        line: usize,
        value: i64,
        max: u8,
    },

    #[error("density filter with min_count {min_count} removed every rating")]
    FilterRemovedEverything { min_count: usize },

    #[error("user {user} has {have} ratings, needs more than {need} to split")]
    SplitTooFewRatings { user: UserId, have: usize, need: usize },

    #[error("unknown item {0}")]
    UnknownItem(ItemId),

    #[error("unknown user {0}")]
    UnknownUser(UserId),

    #[error("training diverged at epoch {epoch}: non-finite parameters")]
    TrainingDiverged { epoch: usize },

    #[error("cannot train on an empty rating matrix")]
    EmptyTrainingMatrix,

    #[error("cannot evaluate MAE on an empty test matrix")]
    EmptyTestMatrix,

    #[error("invalid parameter {name}: {detail}")]
    InvalidParameter { name: &'static str, detail: String },
}

impl Error {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Error::Io { path: path.display().to_string(), source }
    }

    pub(crate) fn param(name: &'static str, detail: impl Into<String>) -> Self {
        Error::InvalidParameter { name, detail: detail.into() }
    }
}
