use thiserror::Error;

use crate::data::CharRange;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("dataset must be a JSON array of sentences")]
    NotAnArray,
    #[error("sentence {sent_id}: missing or mistyped field `{field}`")]
    MissingField { sent_id: String, field: String },
    #[error("sentence {sent_id}: field `{field}`: {reason}")]
    BadValue {
        sent_id: String,
        field: String,
        reason: String,
    },
    #[error("sentence {sent_id}: field `{field}`: offset {value:?} is not of the form begin:end")]
    BadOffset {
        sent_id: String,
        field: String,
        value: String,
    },
    #[error("sentence {sent_id}: field `{field}`: declared {declared:?} but text has {found:?}")]
    TextMismatch {
        sent_id: String,
        field: String,
        declared: String,
        found: String,
    },
    #[error("sentence {sent_id}: range {range} outside text of {len} characters")]
    OutOfBounds {
        sent_id: String,
        range: CharRange,
        len: usize,
    },
    #[error("sentence {sent_id}: invalid range {range}: {reason}")]
    InvalidRange {
        sent_id: String,
        range: CharRange,
        reason: &'static str,
    },
    #[error("sentence {sent_id}: field `{field}` has an empty polar expression")]
    EmptyExpression { sent_id: String, field: String },
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("expected a {expected} graph, found {found}")]
    WrongEncoding {
        expected: &'static str,
        found: &'static str,
    },
    #[error("ill-formed graph: {0}")]
    IllFormed(String),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("gold has {gold} sentences but prediction has {pred}")]
    LengthMismatch { gold: usize, pred: usize },
    #[error("no prediction for gold sentence {sent_id:?}")]
    MissingPrediction { sent_id: String },
    #[error("{0}")]
    Config(String),
}

#[derive(Debug, Error)]
pub enum ConllError {
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
}
