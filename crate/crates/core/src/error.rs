use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {field}: {message}")]
    InvalidConfig { field: String, message: String },

    #[error("slot {slot} is outside the episode horizon of {horizon} slots")]
    SlotOutOfRange { slot: usize, horizon: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate noise schedule at step {step}: cumulative product equals 1")]
    DegenerateSchedule { step: usize },

    #[error("every entry of head {head} is masked")]
    EmptyMask { head: usize },

    #[error("mask violation on head {head}: entry {choice} is infeasible")]
    MaskViolation { head: usize, choice: usize },

    #[error("malformed joint action: {0}")]
    MalformedAction(String),

    #[error("non-finite training loss at iteration {iteration}: {diagnostics}")]
    NonFiniteLoss { iteration: usize, diagnostics: String },

    #[error("instance too large for exhaustive search: {0}")]
    InstanceTooLarge(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    TomlDe(#[from] toml::de::Error),

    #[error(transparent)]
    TomlSer(#[from] toml::ser::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field: field.into(),
            message: message.into(),
        }
    }
}
