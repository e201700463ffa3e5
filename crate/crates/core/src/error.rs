use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("unsupported field: d = {0}")]
    UnsupportedField(i64),
    #[error("general position violated: {0}")]
    GeneralPosition(String),
    #[error("precision unreachable: {0}")]
    Precision(String),
    #[error("search exhausted: {0}")]
    SearchExhausted(String),
    #[error("singular input: {0}")]
    Singular(String),
    #[error("cache error: {0}")]
    Cache(String),
}

impl Error {
    /// Process exit code used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation(_) | Error::UnsupportedField(_) | Error::Singular(_) => 2,
            Error::GeneralPosition(_) => 3,
            Error::Precision(_) => 4,
            Error::SearchExhausted(_) => 5,
            Error::Cache(_) => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Validation(msg.into()))
}
