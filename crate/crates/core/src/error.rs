use std::path::PathBuf;

use thiserror::Error;

use crate::graph::NodeId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("invalid argument to {op}: {detail}")]
    InvalidArgument { op: &'static str, detail: String },

    #[error("non-finite value produced by {op}")]
    NonFinite { op: &'static str },

    #[error("table parse error at row {row} (line {line}): {detail}")]
    TableParse { row: usize, line: usize, detail: String },

    #[error("invalid architecture: {0}")]
    InvalidGraph(String),

    #[error("shape inference failed at node {node}: {detail}")]
    ShapeInference { node: NodeId, detail: String },

    #[error("layer schedule has no entry for level {0}")]
    MissingLevel(u8),

    #[error("unknown name: {0}")]
    UnknownName(String),

    #[error("mutation rejected: {0}")]
    MutationRejected(String),

    #[error("could not draw a valid architecture after {attempts} attempts (seed {seed})")]
    RetryBudgetExhausted { attempts: usize, seed: u64 },

    #[error("training aborted at step {step}: {detail}")]
    TrainingAborted { step: usize, detail: String },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("dataset file error: {0}")]
    DatasetFormat(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Errors caused by bad input (architectures, configs, names, file
    /// contents) rather than by a failure while running.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::TableParse { .. }
                | Error::InvalidGraph(_)
                | Error::UnknownName(_)
                | Error::Config(_)
                | Error::Checkpoint(_)
                | Error::DatasetFormat(_)
                | Error::MissingLevel(_)
        )
    }

    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape { op, detail: detail.into() }
    }

    pub(crate) fn arg(op: &'static str, detail: impl Into<String>) -> Self {
        Error::InvalidArgument { op, detail: detail.into() }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
