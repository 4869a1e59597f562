//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by any stage of the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed row at line {line} in {path}: {reason}")]
    MalformedRow {
        path: String,
        line: usize,
        reason: String,
    },

    #[error("OHLC inconsistency at line {line}: {reason}")]
    OhlcInconsistent { line: usize, reason: String },

    #[error("timestamps not strictly increasing at line {line} ({day})")]
    NonMonotonicTimestamp { line: usize, day: String },

    #[error("duplicated day {day} at line {line}")]
    DuplicateDay { line: usize, day: String },

    #[error("calendar gap before {day}: missing {missing} day(s)")]
    CalendarGap { day: String, missing: i64 },

    #[error("non-positive close {value} on {day}")]
    NonPositiveClose { day: String, value: f64 },

    #[error("insufficient history: {0}")]
    InsufficientHistory(String),

    #[error("degenerate barrier: {0}")]
    DegenerateBarrier(String),

    #[error("degenerate thresholds: {0}")]
    DegenerateThresholds(String),

    #[error("Sharpe ratio undefined: {0}")]
    UndefinedSharpe(String),

    #[error("optimization failed for interval {start}..{end}: {reason}")]
    OptimizationFailed {
        start: String,
        end: String,
        reason: String,
    },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("calendar mismatch: {0}")]
    CalendarMismatch(String),

    #[error("invalid predictions: {0}")]
    InvalidPredictions(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("missing probabilities for sample {0}")]
    MissingProbabilities(usize),

    #[error("no context available for {day}: {reason}")]
    NoContext { day: String, reason: String },

    #[error("prompt mode mismatch: {0}")]
    ModeContextMismatch(String),

    #[error("tweet {0} was dropped by the filter and cannot be rendered")]
    DroppedTweet(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("json error in {path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("internal invariant violation: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
