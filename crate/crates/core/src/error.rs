//! Shared error type for the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied value violates an operation's preconditions.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A token id is outside the vocabulary of the model it was used with.
    #[error("unknown token id {0} (vocabulary size {1})")]
    UnknownToken(u32, usize),

    /// A rendered or target sequence exceeds the model's positional table.
    #[error("sequence of length {len} exceeds maximum length {max}")]
    SequenceTooLong { len: usize, max: usize },

    /// A model configuration is internally inconsistent.
    #[error("invalid model config: {0}")]
    InvalidConfig(String),

    /// A weight file has the wrong magic, version, or checksum.
    #[error("weight file format: {0}")]
    WeightFormat(String),

    /// A weight file ends before all declared tensors were read.
    #[error("weight file truncated: expected {expected} bytes, found {found}")]
    WeightTruncated { expected: u64, found: u64 },

    /// Backbone training produced a non-finite loss.
    #[error("training diverged at epoch {epoch}: loss is not finite")]
    TrainingDiverged { epoch: usize },

    /// A text input (interaction log, config, checkpoint) failed to parse.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// An evaluation request cannot be satisfied as posed.
    #[error("evaluation: {0}")]
    Eval(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
