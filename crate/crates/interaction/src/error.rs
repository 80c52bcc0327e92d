use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InteractionError {
    #[error("router output breaks the contract ({reason}): {raw:?}")]
    ContractViolation { raw: String, reason: String },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("backend unavailable: {0}")]
    Backend(String),
    #[error("missing configuration: {0}")]
    Config(String),
}
