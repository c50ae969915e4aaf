use thiserror::Error;

use crate::graph::NodeId;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unknown node {0}")]
    UnknownNode(NodeId),

    #[error("the graph is empty")]
    EmptyGraph,

    #[error("the graph is not connected ({components} components)")]
    Disconnected { components: usize },

    #[error("power iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("invalid address {0:?}")]
    InvalidAddress(Vec<usize>),

    #[error("similarity of node {0} to itself is undefined")]
    SelfPair(NodeId),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
