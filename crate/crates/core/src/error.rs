use thiserror::Error;

/// Errors raised by the simulator, scorers and experiment runners.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A configuration object (scene, agent, sweep, threshold) is invalid.
    #[error("configuration error: {0}")]
    Config(String),
    /// An argument violates an operation's precondition.
    #[error("input error: {0}")]
    Input(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn config_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}

pub(crate) fn input_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Input(msg.into()))
}
