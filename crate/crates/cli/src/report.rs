//! Failure classes, their exit statuses and the machine-readable report
//! written to stderr.

use decoherence_core::Error;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ErrorKind {
    ConfigInvalid,
    ModelUnbounded,
    NumericalFailure,
    CheckFailed,
    Io,
}

impl ErrorKind {
    pub fn exit_code(self) -> u8 {
        match self {
            ErrorKind::ConfigInvalid => 2,
            ErrorKind::ModelUnbounded => 3,
            ErrorKind::NumericalFailure | ErrorKind::CheckFailed | ErrorKind::Io => 4,
        }
    }
}

#[derive(Debug, Clone, Serialize, thiserror::Error)]
#[error("{kind:?}: {message}")]
pub struct CliError {
    pub kind: ErrorKind,
    /// Scenario field at fault, as a JSON pointer, when known.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
    pub message: String,
}

impl CliError {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self { kind: ErrorKind::ConfigInvalid, field: Some(field.into()), message: message.into() }
    }

    pub fn new(kind: ErrorKind, message: impl Into<String>) -> Self {
        Self { kind, field: None, message: message.into() }
    }

    /// Core errors raised while building a model from a scenario section.
    pub fn in_field(field: &str, e: Error) -> Self {
        let mut err = Self::from(e);
        if err.kind == ErrorKind::ConfigInvalid {
            err.field = Some(field.to_string());
        }
        err
    }

    pub fn report(&self) -> String {
        #[derive(Serialize)]
        struct Report<'a> {
            status: &'static str,
            exit_code: u8,
            #[serde(flatten)]
            error: &'a CliError,
        }
        let report = Report { status: "error", exit_code: self.kind.exit_code(), error: self };
        serde_json::to_string(&report)
            .unwrap_or_else(|_| format!("{{\"status\":\"error\",\"message\":{:?}}}", self.message))
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let kind = match &e {
            Error::Unbounded { .. } | Error::IrDivergent { .. } => ErrorKind::ModelUnbounded,
            Error::InvalidParameter(_)
            | Error::CutoffMissing(_)
            | Error::Indeterminate(_)
            | Error::BetaNonPositive(_)
            | Error::IntervalsOverlap(_)
            | Error::WindowTooShort(_)
            | Error::GridMismatch
            | Error::OscillationOverflow { .. } => ErrorKind::ConfigInvalid,
            Error::OnCut { .. } | Error::EigenFailure(_) | Error::Quadrature(_) => ErrorKind::NumericalFailure,
            Error::Io(_) => ErrorKind::Io,
        };
        Self::new(kind, e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::new(ErrorKind::Io, e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
