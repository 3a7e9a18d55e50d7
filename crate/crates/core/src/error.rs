use thiserror::Error;

use crate::community::GroupId;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("no data")]
    NoData,

    #[error("undefined: {0}")]
    Undefined(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    Shape {
        op: &'static str,
        left: [usize; 2],
        right: [usize; 2],
    },

    #[error("width mismatch at stage {stage}: expected {expected}, got {actual}")]
    Width {
        stage: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("non-finite value produced by {0}")]
    NonFinite(String),

    #[error("backward: {0}")]
    Backward(String),

    #[error("all attention inputs are masked")]
    AllMasked,

    #[error("attention over zero nodes")]
    EmptyAttention,

    #[error("maximal clique count exceeded the cap of {0}")]
    CliqueLimit(usize),

    #[error("group {0} has an empty member set")]
    EmptyGroup(GroupId),

    #[error("group {group}: {message}")]
    Group { group: GroupId, message: String },

    #[error("missing target for group {0}")]
    MissingTarget(GroupId),

    #[error("snapshot index mismatch: {0}")]
    SnapshotMismatch(String),

    #[error("insufficient snapshots: need at least {needed}, have {have}")]
    InsufficientSnapshots { needed: usize, have: usize },

    #[error("feature configuration mismatch: {0}")]
    FeatureMismatch(String),

    #[error("configuration: {0}")]
    Config(String),

    #[error("stage {stage}: {message}")]
    Stage { stage: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
