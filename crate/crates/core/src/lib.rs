//! Sentiment graphs: data model, graph encodings, the bi-lexical dependency
//! baseline encoding, and evaluation.

pub mod bootstrap;
pub mod data;
pub mod dependency;
pub mod encodings;
pub mod error;
pub mod eval;
pub mod fixtures;
pub mod synth;

pub use data::{
    parse_dataset, serialize_dataset, Opinion, Polarity, Role, Sentence, SentimentGraph, SpanSet,
    TokenSet,
};
pub use encodings::{Encoding, GeneralGraph};
pub use error::{ConllError, DataError, EvalError, GraphError};
pub use eval::{evaluate, sent_graph_f1, span_f1, MetricsReport, Prf};
