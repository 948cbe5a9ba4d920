use std::process::ExitCode;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad configuration or inconsistent user input.
    #[error("configuration error: {0}")]
    Config(String),
    /// A sampler or solver failed on valid input.
    #[error("numerical failure: {0}")]
    Numerical(bcel_core::Error),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 1,
        })
    }

    pub(crate) fn io(what: &std::path::Path, e: std::io::Error) -> Self {
        CliError::Io(format!("{}: {e}", what.display()))
    }
}

impl From<bcel_core::Error> for CliError {
    fn from(e: bcel_core::Error) -> Self {
        use bcel_core::Error as E;
        match e {
            // Malformed data files and shape mismatches come from the user.
            E::Input(m) => CliError::Config(m),
            E::Parse { line, msg } => CliError::Config(format!("line {line}: {msg}")),
            other => CliError::Numerical(other),
        }
    }
}
