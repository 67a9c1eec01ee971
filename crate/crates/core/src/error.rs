use thiserror::Error;

/// Errors produced by the partition, coloring and simulation layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },

    #[error("the root has no parent")]
    NoParent,

    #[error("range is undefined at a leaf")]
    UndefinedRange,

    #[error("gap is undefined at the root")]
    UndefinedGap,

    #[error("enumeration would exceed the node cap of {cap}")]
    TooLarge { cap: usize },

    #[error("oracle budget exceeded: {0}")]
    BudgetExceeded(String),

    #[error("invalid feedback: {0}")]
    InvalidFeedback(String),

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
