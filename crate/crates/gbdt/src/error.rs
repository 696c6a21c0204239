use crate::matcore::LinalgError;

/// Coarse classification used by the command-line driver for exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Numerical,
    Verification,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("node identity violated: residual {residual:.3e} exceeds tolerance {tolerance:.3e}")]
    IdentityViolation { residual: f64, tolerance: f64 },
    #[error("input outside the admissible class: {0}")]
    NotAdmissible(String),
    #[error("evaluation point {0} lies within tolerance of a pole")]
    NearPole(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("verification failed: {0}")]
    Verification(String),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Linalg(e) => match e {
                LinalgError::DimensionMismatch(_)
                | LinalgError::NotSquare(_)
                | LinalgError::NotHermitian { .. }
                | LinalgError::InvalidGrid(_) => ErrorKind::Validation,
                _ => ErrorKind::Numerical,
            },
            Error::InvalidInput(_) | Error::IdentityViolation { .. } | Error::NotAdmissible(_) => {
                ErrorKind::Validation
            }
            Error::NearPole(_) | Error::Numerical(_) => ErrorKind::Numerical,
            Error::Verification(_) => ErrorKind::Verification,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
