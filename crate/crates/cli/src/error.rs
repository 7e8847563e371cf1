use dclab::DclabError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    /// A qualitative expectation checked during the run did not hold.
    #[error("expectation violated: {name}: {detail}")]
    Expectation { name: String, detail: String },

    #[error(transparent)]
    Core(#[from] DclabError),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn expectation(name: impl Into<String>, detail: impl Into<String>) -> Self {
        CliError::Expectation { name: name.into(), detail: detail.into() }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Expectation { .. } => 1,
            CliError::Core(DclabError::Domination(_)) => 1,
            _ => 2,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
