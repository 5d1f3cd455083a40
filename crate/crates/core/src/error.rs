//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A degradation / model / intervention specification is out of range.
    #[error("invalid spec: {0}")]
    InvalidSpec(String),

    /// An input value violates an operation's preconditions.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Image codec or dataset I/O failure inside the degradation pipeline.
    #[error("degradation io: {0}")]
    DegradationIo(String),

    /// Counterfactual generation hit non-finite gradients.
    #[error("counterfactual sample aborted: {0}")]
    AbortSample(String),

    /// Training halted after repeated non-finite gradients.
    #[error("training fault: {0}")]
    TrainingFault(String),

    /// Checkpoint archive is malformed or does not match the model.
    #[error("checkpoint: {0}")]
    Checkpoint(String),

    /// Configuration file / override parsing.
    #[error("config: {0}")]
    Config(String),

    /// Verification suite failed (maps to CLI exit code 1).
    #[error("verification failed: {0}")]
    VerificationFailed(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid_spec(msg: impl Into<String>) -> Self {
        Error::InvalidSpec(msg.into())
    }

    pub fn invalid_input(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
