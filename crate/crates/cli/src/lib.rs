//! Library side of the `bai` command: config parsing, result artifacts and
//! the oracle report.

pub mod config;
pub mod oracle;
pub mod report;

/// Process exit codes.
pub const EXIT_OK: u8 = 0;
pub const EXIT_VALIDATION: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_IO: u8 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Io(_) => EXIT_IO,
            CliError::Failed(_) => EXIT_VALIDATION,
        }
    }
}

impl From<bai_core::Error> for CliError {
    fn from(e: bai_core::Error) -> Self {
        match e {
            bai_core::Error::Convergence(_) => CliError::Failed(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}
