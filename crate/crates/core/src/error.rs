//! Error type shared across the library.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("duplicate comment id {id:?} in thread {thread_id:?}")]
    DuplicateId { thread_id: String, id: String },

    #[error("cycle detected in thread {thread_id:?}: {}", cycle.join(" -> "))]
    CycleDetected {
        thread_id: String,
        cycle: Vec<String>,
    },

    #[error("item {item_id:?} has no judgments")]
    ItemWithoutJudgments { item_id: String },

    #[error("label set must have at least 2 labels, got {got}")]
    TooFewLabels { got: usize },

    #[error("unknown label code {code:?} for dimension {dimension}")]
    InvalidLabelCode { code: String, dimension: String },

    #[error("turn {item_id:?} is missing {dimension} annotations")]
    MissingAnnotation { item_id: String, dimension: String },

    #[error("judgment count matrix rows must all sum to the same n >= 2")]
    UnequalRowSums,

    #[error("{metric} is degenerate: {reason}")]
    DegenerateAgreement {
        metric: &'static str,
        reason: String,
    },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("prediction/gold length mismatch: {pred} vs {gold}")]
    LengthMismatch { pred: usize, gold: usize },

    #[error("non-finite {what} encountered")]
    NonFinite { what: String },

    #[error("training diverged: loss increased for {epochs} consecutive epochs")]
    Diverged { epochs: usize },

    #[error("fold {fold} contains no turns")]
    EmptyFold { fold: usize },

    #[error("need at least {needed} topics, corpus has {got}")]
    NotEnoughTopics { needed: usize, got: usize },

    #[error("no tagger model supplied for dimension {dimension}")]
    MissingTagger { dimension: String },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("unsupported format version {got}, expected {expected}")]
    FormatVersion { got: u32, expected: u32 },

    #[error("malformed record on line {line}: {source}")]
    MalformedRecord {
        line: usize,
        #[source]
        source: serde_json::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
