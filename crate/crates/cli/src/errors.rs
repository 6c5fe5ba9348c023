//! Exit-code mapping: 0 success, 2 parse/config error, 3 degenerate
//! schedule, 4 capability mismatch, 1 everything else.

use pavg::Error;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_DEGENERATE: u8 = 3;
pub const EXIT_CAPABILITY: u8 = 4;
pub const EXIT_OTHER: u8 = 1;

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }

    pub fn io(message: impl std::fmt::Display) -> Self {
        CliError {
            code: EXIT_OTHER,
            message: message.to_string(),
        }
    }
}

impl From<Error> for CliError {
    fn from(err: Error) -> Self {
        let code = match &err {
            Error::DegenerateSchedule { .. } | Error::DivisionDegeneracy { .. } => EXIT_DEGENERATE,
            Error::UnsupportedCapability(_) => EXIT_CAPABILITY,
            Error::DimensionMismatch { .. }
            | Error::InvalidParameter(_)
            | Error::ScheduleConstruction(_) => EXIT_CONFIG,
        };
        CliError {
            code,
            message: err.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::io(err)
    }
}

pub type CliResult<T> = Result<T, CliError>;
