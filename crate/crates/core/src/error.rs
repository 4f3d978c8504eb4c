use thiserror::Error;

use crate::bandit::BanditError;
use crate::data::DataError;
use crate::oracle::OracleError;

/// Coarse classification used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    OracleFatal,
    Other,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Bandit(#[from] BanditError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("usage error: {0}")]
    Usage(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) | Error::Usage(_) => ErrorKind::Config,
            Error::Bandit(BanditError::Config(_)) => ErrorKind::Config,
            Error::Bandit(_) | Error::Internal(_) => ErrorKind::Other,
            Error::Data(DataError::Config(_)) => ErrorKind::Config,
            Error::Data(_) => ErrorKind::Data,
            Error::Oracle(OracleError::Config(_)) => ErrorKind::Config,
            Error::Oracle(e) if e.is_fatal() => ErrorKind::OracleFatal,
            Error::Oracle(_) => ErrorKind::Other,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
