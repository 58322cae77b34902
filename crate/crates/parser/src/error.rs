use thiserror::Error;

#[derive(Debug, Error)]
pub enum ParserError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("cannot train on an empty dataset")]
    EmptyDataset,
    #[error("training diverged at epoch {epoch}, step {step}: {detail}")]
    Diverged {
        epoch: usize,
        step: usize,
        detail: String,
    },
    #[error("assignment needs rows <= columns, got {rows} x {cols}")]
    Shape { rows: usize, cols: usize },
    #[error("assignment costs must be finite")]
    NonFiniteCost,
    #[error(transparent)]
    Eval(#[from] sentgraph::EvalError),
}
