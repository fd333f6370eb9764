use std::path::PathBuf;

use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_FIT: i32 = 3;
pub const EXIT_SCENARIO: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("environment triple is infeasible: slack = {slack:e}")]
    Infeasible { slack: f64 },

    #[error("fringe fit failed for {}", .bases.join(", "))]
    Fit { bases: Vec<String> },

    #[error("scenario mismatch: {0}")]
    Scenario(String),

    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("{}: {message}", .path.display())]
    Parse { path: PathBuf, message: String },

    #[error(transparent)]
    Core(#[from] vistomo_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use vistomo_core::Error as E;
        match self {
            CliError::Infeasible { .. } | CliError::Core(E::Infeasible { .. }) => EXIT_INFEASIBLE,
            CliError::Fit { .. } => EXIT_FIT,
            CliError::Scenario(_)
            | CliError::Core(
                E::ScenarioMismatch(_)
                | E::InfeasibleData(_)
                | E::SumRuleInconsistent { .. }
                | E::ZeroCoherence,
            ) => EXIT_SCENARIO,
            _ => EXIT_USAGE,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Self {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }
}

pub type CliResult<T> = Result<T, CliError>;
