use std::fmt;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("cannot parse scalar {0:?}")]
pub struct ParseScalarError(pub String);

/// One failed axiom, with the indices that witness it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub axiom: String,
    pub witness: Vec<usize>,
    pub detail: String,
}

impl Violation {
    pub fn new(axiom: impl Into<String>, witness: Vec<usize>, detail: impl Into<String>) -> Self {
        Self { axiom: axiom.into(), witness, detail: detail.into() }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at {:?}", self.axiom, self.witness)?;
        if !self.detail.is_empty() {
            write!(f, " ({})", self.detail)?;
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{context}: {}", summarize(.violations))]
    Invalid { context: &'static str, violations: Vec<Violation> },
    #[error(transparent)]
    Scalar(#[from] ParseScalarError),
    #[error("schema: {0}")]
    Schema(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("infeasible parameters: {0}")]
    Infeasible(String),
    #[error("numerical: {0}")]
    Numerical(String),
}

fn summarize(v: &[Violation]) -> String {
    match v.first() {
        None => "no violations recorded".into(),
        Some(first) if v.len() == 1 => first.to_string(),
        Some(first) => format!("{first} (+{} more)", v.len() - 1),
    }
}

impl Error {
    pub fn invalid(context: &'static str, violations: Vec<Violation>) -> Self {
        Error::Invalid { context, violations }
    }

    pub fn violations(&self) -> &[Violation] {
        match self {
            Error::Invalid { violations, .. } => violations,
            _ => &[],
        }
    }

    pub fn is_parse(&self) -> bool {
        matches!(self, Error::Scalar(_) | Error::Schema(_) | Error::Json(_) | Error::Io(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Turns a non-empty violation list into an error.
pub(crate) fn check(context: &'static str, violations: Vec<Violation>) -> Result<()> {
    if violations.is_empty() {
        Ok(())
    } else {
        Err(Error::invalid(context, violations))
    }
}
