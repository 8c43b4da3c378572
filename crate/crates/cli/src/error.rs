use tcs_core::day2day::EngineError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("gridlock: {0}")]
    Gridlock(String),
    #[error("not converged: {0}")]
    NotConverged(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Gridlock(_) => 3,
            CliError::NotConverged(_) => 4,
            CliError::Io(_) | CliError::Other(_) => 1,
        }
    }
}

impl From<EngineError> for CliError {
    fn from(e: EngineError) -> Self {
        match e {
            _ if e.is_gridlock() => CliError::Gridlock(e.to_string()),
            EngineError::Config { field, message } => CliError::Config(format!("{field}: {message}")),
            EngineError::Population(_) | EngineError::Market(_) | EngineError::Snapshot(_) => {
                CliError::Config(e.to_string())
            }
            EngineError::Io(e) => CliError::Io(e),
            other => CliError::Other(other.to_string()),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Other(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Other(e.to_string())
    }
}
