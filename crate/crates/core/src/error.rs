use thiserror::Error;

/// Errors raised by the laboratory.
///
/// The variants line up with the CLI exit codes: `InvalidInput` is a
/// configuration problem, `Plugin` is an external program misbehaving, the
/// rest are internal failures.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    #[error("contract violation: {message} (input: {input})")]
    Contract { message: String, input: String },

    #[error("plugin `{plugin}`: {message}")]
    Plugin { plugin: String, message: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn contract(msg: impl Into<String>, input: impl Into<String>) -> Self {
        Error::Contract {
            message: msg.into(),
            input: input.into(),
        }
    }
}
