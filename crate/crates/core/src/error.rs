use thiserror::Error;

use crate::lang::{Diagnostic, ParseError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("register dimension {dim} exceeds the configured cap of {cap}")]
    RegisterTooLarge { dim: usize, cap: usize },

    #[error("operators are not comparable: difference deviates from Hermitian by {deviation:e}")]
    NotComparable { deviation: f64 },

    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("division by near-zero scalar {0:e}")]
    DivisionByNearZero(f64),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("operator contains a non-finite entry")]
    NonFinite,

    #[error("not a valid density pair: {0}")]
    InvalidDensity(String),

    #[error("not a valid predicate: {0}")]
    InvalidPredicate(String),

    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error("{}", format_diagnostics(.0))]
    Type(Vec<Diagnostic>),

    #[error("loop did not converge after {iterations} iterations (last change {delta:e})")]
    NonConvergence { iterations: usize, delta: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("malformed json: {0}")]
    Json(String),
}

fn format_diagnostics(diags: &[Diagnostic]) -> String {
    let lines: Vec<String> = diags.iter().map(|d| d.to_string()).collect();
    format!("type errors:\n  {}", lines.join("\n  "))
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
