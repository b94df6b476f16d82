use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at byte {position} near `{token}`: {reason}")]
    Parse {
        position: usize,
        token: String,
        reason: String,
    },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value: {0}")]
    Numeric(String),

    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    Divergence { epoch: usize, loss: f64 },

    #[error("lookup failed for {arch}: {what}")]
    Lookup { arch: String, what: String },

    #[error("gave up after {attempts} draws with only {kept} feasible architectures")]
    Halting { attempts: usize, kept: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: line {line}, column `{column}`: {reason}")]
    Schema {
        path: PathBuf,
        line: usize,
        column: String,
        reason: String,
    },

    #[error("{path}: line {line}: duplicate architecture {arch}")]
    DuplicateKey { path: PathBuf, line: usize, arch: String },

    #[error("evaluating {arch}: {source}")]
    Evaluation {
        arch: String,
        #[source]
        source: Box<Error>,
    },

    #[error("results record on line {line}: {source}")]
    Record {
        line: usize,
        #[source]
        source: serde_json::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
