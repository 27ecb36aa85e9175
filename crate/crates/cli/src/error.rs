use std::fmt;

use pcskew::estimator::EstimateError;
use pcskew::matrix::MatrixError;
use pcskew::sim::SimError;
use serde::Serialize;

use crate::input::InputError;

/// Failure classes, each with its own process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Input,
    Numeric,
    Config,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Input => 2,
            ErrorKind::Numeric => 3,
            ErrorKind::Config => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::Input,
            message: message.into(),
        }
    }

    pub fn numeric(message: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::Numeric,
            message: message.into(),
        }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::Config,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.kind.exit_code()
    }

    /// The machine-readable object written to standard error.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Body<'a> {
            kind: ErrorKind,
            exit_code: i32,
            message: &'a str,
        }
        #[derive(Serialize)]
        struct Wrapper<'a> {
            error: Body<'a>,
        }
        serde_json::to_string(&Wrapper {
            error: Body {
                kind: self.kind,
                exit_code: self.exit_code(),
                message: &self.message,
            },
        })
        .expect("error object serializes")
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<InputError> for CliError {
    fn from(e: InputError) -> Self {
        CliError::input(e.to_string())
    }
}

impl From<MatrixError> for CliError {
    fn from(e: MatrixError) -> Self {
        match e {
            MatrixError::EmptyMatrix { .. } | MatrixError::NonFinite { .. } | MatrixError::DimensionMismatch(_) => {
                CliError::input(e.to_string())
            }
            MatrixError::TooManyComponents { .. } => CliError::config(e.to_string()),
            _ => CliError::numeric(e.to_string()),
        }
    }
}

impl From<EstimateError> for CliError {
    fn from(e: EstimateError) -> Self {
        match e {
            EstimateError::Matrix(m) => m.into(),
            EstimateError::TooFewObservations { .. } => CliError::input(e.to_string()),
            EstimateError::InvalidAlpha(_) | EstimateError::InvalidMaxK { .. } | EstimateError::UnknownTestKind(_) => {
                CliError::config(e.to_string())
            }
            EstimateError::Skew { .. } => CliError::numeric(e.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Matrix(m) => m.into(),
            _ => CliError::config(e.to_string()),
        }
    }
}
