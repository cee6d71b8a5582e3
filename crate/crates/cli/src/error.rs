use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Data(#[from] rfdrone_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use rfdrone_core::Error as E;
        match self {
            CliError::Usage(_) | CliError::Data(E::InvalidConfig(_) | E::InvalidSpec(_)) => 1,
            CliError::Data(_) => 2,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}
