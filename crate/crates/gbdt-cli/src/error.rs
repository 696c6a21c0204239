//! Errors of the driver and their exit codes.

use std::fmt;

use gbdt::ErrorKind;

#[derive(Debug)]
pub enum CliError {
    /// Malformed or unsupported configuration.
    Config(String),
    /// Unreadable input or unwritable output.
    Io(String),
    Lib(gbdt::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Lib(e) => match e.kind() {
                ErrorKind::Validation => 2,
                ErrorKind::Numerical => 3,
                ErrorKind::Verification => 4,
            },
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) | CliError::Io(m) => f.write_str(m),
            CliError::Lib(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<gbdt::Error> for CliError {
    fn from(e: gbdt::Error) -> Self {
        CliError::Lib(e)
    }
}
