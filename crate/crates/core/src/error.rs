use thiserror::Error;

use crate::conllu::ConlluError;
use crate::context::ContextError;
use crate::embeddings::EmbeddingError;
use crate::eval::EvalError;
use crate::graph::GraphError;
use crate::scorer::ScoreError;
use crate::transport::OtError;

/// Crate-level error, wrapping the per-module errors.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Conllu(#[from] ConlluError),

    #[error(transparent)]
    Context(#[from] ContextError),

    #[error(transparent)]
    Embedding(#[from] EmbeddingError),

    #[error(transparent)]
    Graph(#[from] GraphError),

    #[error(transparent)]
    Transport(#[from] OtError),

    #[error(transparent)]
    Score(#[from] ScoreError),

    #[error(transparent)]
    Eval(#[from] EvalError),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
