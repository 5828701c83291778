use std::path::PathBuf;

use thiserror::Error;

pub const EXIT_SUCCESS: u8 = 0;
pub const EXIT_VIOLATION: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_INTERNAL: u8 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration {}: {message}", .path.display())]
    Config { path: PathBuf, message: String },

    #[error("{} referenced run(s) have no record; run `uhs solve` first. Absent hashes: {}", .0.len(), .0.join(", "))]
    MissingRuns(Vec<String>),

    #[error(transparent)]
    Core(#[from] uhs_core::Error),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("internal failure: {0}")]
    Internal(String),
}

impl CliError {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io { context: context.into(), source }
    }

    /// 2 for anything the user can fix in the configuration or by running an earlier step,
    /// 3 for everything else.
    pub fn exit_code(&self) -> u8 {
        use uhs_core::Error as E;
        match self {
            CliError::Config { .. } | CliError::MissingRuns(_) => EXIT_CONFIG,
            CliError::Core(
                E::Config(_)
                | E::Domain(_)
                | E::Precondition(_)
                | E::NonDegeneracy { .. }
                | E::Range { .. }
                | E::MissingCache { .. },
            ) => EXIT_CONFIG,
            _ => EXIT_INTERNAL,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
