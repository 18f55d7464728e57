use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("resample limit of {limit} exceeded while placing {what}")]
    ResampleLimitExceeded { limit: usize, what: String },

    #[error("reliable subgraph is acyclic; no backbone cycle exists")]
    NoBackbone,

    #[error("instance with {n} vertices exceeds the limit of {max}")]
    InstanceTooLarge { n: usize, max: usize },

    #[error("vertex {vertex} cannot reach the backbone cycle")]
    Unreachable { vertex: usize },

    #[error("cluster anchored at {anchor} induces a disconnected subgraph")]
    ClusterDisconnected { anchor: usize },

    #[error("record {record}: computed topology failed validation: {detail}")]
    InvalidTopology { record: usize, detail: String },

    #[error("{split} split would be empty")]
    EmptySplit { split: &'static str },

    #[error("width mismatch: expected {expected}, got {got}")]
    WidthMismatch { expected: usize, got: usize },

    #[error("non-finite loss at epoch {epoch}, step {step} (learning rate {learning_rate:e})")]
    NonFiniteLoss {
        epoch: usize,
        step: usize,
        learning_rate: f64,
    },

    #[error("training set is empty")]
    EmptyTrainingSet,

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("malformed data: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }
}
