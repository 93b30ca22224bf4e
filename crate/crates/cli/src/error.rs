use std::fmt;

use robotgpt::config::ConfigError;
use robotgpt::demostore::StoreError;
use robotgpt::learner::LearnerError;
use robotgpt::llm::LlmError;
use robotgpt::orchestrator::OrchestratorError;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
    External(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Runtime(_) => 2,
            CliError::External(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) | CliError::External(m) => f.write_str(m),
        }
    }
}

pub fn usage(m: impl fmt::Display) -> CliError {
    CliError::Usage(m.to_string())
}

pub fn runtime(m: impl fmt::Display) -> CliError {
    CliError::Runtime(m.to_string())
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Usage(format!("config: {e}"))
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<StoreError> for CliError {
    fn from(e: StoreError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<LearnerError> for CliError {
    fn from(e: LearnerError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<LlmError> for CliError {
    fn from(e: LlmError) -> Self {
        match e {
            LlmError::Transport(_) | LlmError::Api { .. } | LlmError::MissingApiKey => CliError::External(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<OrchestratorError> for CliError {
    fn from(e: OrchestratorError) -> Self {
        match e {
            OrchestratorError::Llm(l) => l.into(),
            other => CliError::Runtime(other.to_string()),
        }
    }
}
