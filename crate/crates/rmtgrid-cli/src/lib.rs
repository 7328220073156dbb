//! Stream file format, run configuration and the subcommand implementations
//! behind the `rmtgrid` binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod stream;

pub use error::{CliError, CliResult};

/// Process exit status shared by every subcommand.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    /// No anomaly, or the null hypothesis is kept.
    Clean,
    /// Anomaly flagged, or the null hypothesis is rejected.
    Alarm,
}

impl Outcome {
    pub fn code(self) -> i32 {
        match self {
            Self::Clean => 0,
            Self::Alarm => 2,
        }
    }
}
