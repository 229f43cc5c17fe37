// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

/// Errors produced anywhere in the simulation and optimization pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid register: {0}")]
    Register(String),

    #[error("invalid value for `{name}`: {reason}")]
    InvalidArgument { name: String, reason: String },

    #[error("parameter `{0}` is not bound")]
    UnboundParameter(String),

    #[error("variable `{0}` is declared more than once")]
    DuplicateVariable(String),

    #[error("shape mismatch for `{name}`: expected {expected}, got {got}")]
    ShapeMismatch {
        name: String,
        expected: usize,
        got: usize,
    },

    #[error("constraint on `{0}` has min > max")]
    InvalidConstraint(String),

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("initial state column {column} has norm {norm}, expected 1")]
    NotNormalized { column: usize, norm: f64 },

    #[error("operator is not Hermitian (max residual {0:e})")]
    NotHermitian(f64),

    #[error("solver could not meet tolerance in interval starting at t = {t_ns} ns")]
    ToleranceFailure { t_ns: usize },

    #[error("step schedule does not match program: {0}")]
    ScheduleMismatch(String),

    #[error("{n} qubits exceeds the limit of {max}")]
    TooManyQubits { n: usize, max: usize },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("loss has imaginary residual {0:e}")]
    ComplexLoss(f64),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    TomlDe(#[from] toml::de::Error),

    #[error(transparent)]
    TomlSer(#[from] toml::ser::Error),
}

impl Error {
    /// True for errors caused by bad input (configs, arguments, shapes) as
    /// opposed to failures while computing.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            Error::ToleranceFailure { .. }
                | Error::ScheduleMismatch(_)
                | Error::NonFinite(_)
                | Error::ComplexLoss(_)
                | Error::Io(_)
                | Error::Json(_)
                | Error::TomlSer(_)
        )
    }

    pub(crate) fn invalid(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            name: name.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
