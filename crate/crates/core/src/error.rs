use thiserror::Error;

/// Errors surfaced by model loading and the analysis engines.
///
/// `Input` covers everything a caller can fix (malformed files, bad
/// references, reserved names, unsupported parameter combinations) and maps
/// to exit code 2 in the CLI.  `Internal` marks invariant violations inside
/// the engine itself; seeing one is a bug.
#[derive(Debug, Error)]
pub enum Error {
    #[error("input error: {0}")]
    Input(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub fn internal(msg: impl Into<String>) -> Self {
        Error::Internal(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
