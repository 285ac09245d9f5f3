//! Pipeline orchestration for the `peakshare` binary: configuration,
//! run manifest, and one function per subcommand.

pub mod config;
pub mod manifest;
pub mod pipeline;

use std::fmt;

/// Errors mapped onto process exit codes: validation problems exit 2,
/// missing upstream artifacts exit 3, numeric failures exit 4.
#[derive(Debug)]
pub enum CliError {
    Validation(String),
    MissingArtifact {
        path: String,
        producer: &'static str,
    },
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::MissingArtifact { .. } => 3,
            CliError::Numeric(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(msg) => write!(f, "{msg}"),
            CliError::MissingArtifact { path, producer } => {
                write!(
                    f,
                    "missing artifact {path}; run `peakshare {producer}` first"
                )
            }
            CliError::Numeric(msg) => write!(f, "numeric failure: {msg}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<peakshare_core::Error> for CliError {
    fn from(e: peakshare_core::Error) -> Self {
        if e.is_validation() {
            CliError::Validation(e.to_string())
        } else {
            CliError::Numeric(e.to_string())
        }
    }
}
