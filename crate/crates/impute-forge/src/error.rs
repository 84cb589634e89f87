use impute_forge_core::assoc::AssocError;
use impute_forge_core::backend::BackendError;
use impute_forge_core::eval::EvalError;
use impute_forge_core::orchestrator::OrchestratorError;
use impute_forge_core::threshold::ThresholdError;
use impute_forge_core::DatasetError;
use thiserror::Error;

use crate::config::ConfigError;
use crate::io::IoError;

/// Everything a subcommand can fail with, mapped onto exit codes.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Backend(String),
    #[error("{0}")]
    ParseExhausted(String),
    #[error("interrupted; partial results were written")]
    Interrupted,
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Backend(_) => 3,
            CliError::ParseExhausted(_) => 4,
            CliError::Interrupted => 130,
        }
    }
}

macro_rules! data_error {
    ($($t:ty),*) => {
        $(impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Data(e.to_string())
            }
        })*
    };
}

data_error!(IoError, DatasetError, AssocError, ThresholdError, EvalError, serde_json::Error);

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(format!("io: {e}"))
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<BackendError> for CliError {
    fn from(e: BackendError) -> Self {
        CliError::Backend(e.to_string())
    }
}

impl From<OrchestratorError> for CliError {
    fn from(e: OrchestratorError) -> Self {
        match e {
            OrchestratorError::Backend(b) => CliError::Backend(b.to_string()),
            e @ OrchestratorError::FallbackFailed { .. } => CliError::ParseExhausted(e.to_string()),
            e => CliError::Data(e.to_string()),
        }
    }
}
