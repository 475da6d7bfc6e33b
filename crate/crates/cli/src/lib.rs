//! Experiment pipelines behind the `cmpc` binary.
//!
//! Each command is a pure function from a config to an output struct, plus a
//! writer that puts CSV/JSON files into an output directory.

pub mod commands;
pub mod config;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] cmpc::Error),
    #[error("{0}")]
    Failed(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("output error: {0}")]
    Output(String),
}

impl CliError {
    /// 2 config, 3 infeasible or failed verification, 4 numeric failure.
    pub fn exit_code(&self) -> i32 {
        use cmpc::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Failed(_) => 3,
            CliError::Io(_) | CliError::Output(_) => 1,
            CliError::Core(e) => match e {
                E::Dimension { .. } | E::InvalidArgument(_) => 2,
                E::OneStepInfeasible { .. }
                | E::OnlineInfeasible { .. }
                | E::DegenerateTerminalSet
                | E::IllPosed { .. } => 3,
                E::NumericOverflow { .. } | E::DareDiverged { .. } => 4,
            },
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Output(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Output(e.to_string())
    }
}
