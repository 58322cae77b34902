//! Permutation-invariant text-to-graph parser for sentiment graphs.
//!
//! Every token is projected onto latent queries; a transformer stack without
//! positional information refines them, and heads turn queries into labeled,
//! anchored nodes and edges. Training matches gold nodes to queries with the
//! Hungarian algorithm, so the loss does not depend on any node order.

pub mod checkpoint;
pub mod config;
pub mod error;
pub mod gradcheck;
pub mod hungarian;
pub mod model;
pub mod objective;
pub mod optim;
pub mod params;
pub mod predict;
pub mod tape;
pub mod train;
pub mod vocab;

pub use config::Config;
pub use error::ParserError;
pub use train::{EpochMetrics, Parser, TrainOptions, TrainReport};
