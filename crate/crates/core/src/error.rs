//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch at {context}: expected {expected}, got {actual}")]
    ShapeMismatch {
        context: String,
        expected: String,
        actual: String,
    },

    #[error("invalid network spec at layer {layer}: {reason}")]
    InvalidSpec { layer: usize, reason: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("training diverged (non-finite loss) at epoch {epoch}")]
    Diverged { epoch: usize },

    #[error("forward trace does not match this network: {0}")]
    TraceMismatch(String),

    #[error("alpha rule {rule} undefined for r_t = {r}")]
    AlphaDomain { rule: String, r: f64 },

    #[error("weight update underflowed to zero total mass")]
    WeightUnderflow,

    #[error("filter rectangle out of bounds: {0}")]
    FilterOutOfBounds(String),

    #[error("requested {requested} filters but only {available} distinct valid filters exist")]
    FilterSpaceExhausted { requested: u64, available: u64 },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("networks cannot be merged: layer {layer}: {reason}")]
    MergeIncompatible { layer: usize, reason: String },

    #[error("enumeration domain has {size} points, exceeding the cap of {cap}")]
    DomainTooLarge { size: u128, cap: u128 },

    #[error("budget {budget} is below the smallest model of this family ({smallest})")]
    BudgetTooSmall { budget: u64, smallest: u64 },

    #[error("malformed {format} data: {reason}")]
    Format { format: String, reason: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn format(format: &str, reason: impl Into<String>) -> Self {
        Error::Format {
            format: format.to_string(),
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
