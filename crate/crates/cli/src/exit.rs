//! Process exit codes and the mapping from model errors onto them.

use tumorstrip_core::Error;

pub const OK: i32 = 0;
pub const CONFIG: i32 = 1;
pub const MODEL: i32 = 2;
pub const NUMERICAL: i32 = 3;
pub const TERMINATED: i32 = 4;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    pub fn new(code: i32, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self::new(CONFIG, message)
    }

    pub fn context(self, what: &str) -> Self {
        Self::new(self.code, format!("{what}: {}", self.message))
    }

    pub fn io(err: std::io::Error, path: &std::path::Path) -> Self {
        Self::config(format!("cannot write {}: {err}", path.display()))
    }
}

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        let code = match &err {
            Error::InvalidGrid(_) | Error::InvalidArgument(_) | Error::ModeNotTracked(_) => CONFIG,
            Error::NonPositiveParameter { .. }
            | Error::AlphaOutOfRange { .. }
            | Error::NonPositiveProfile { .. }
            | Error::BracketNotFound { .. }
            | Error::DomainError { .. }
            | Error::GridMismatch(_)
            | Error::InconsistentState(_) => MODEL,
            Error::ToleranceNotReached { .. }
            | Error::SingularSystem(_)
            | Error::WindowTooShort { .. }
            | Error::AmplitudeUnderflow { .. } => NUMERICAL,
            Error::PinchOff { .. } | Error::StepRejected { .. } => TERMINATED,
        };
        Failure::new(code, err.to_string())
    }
}
