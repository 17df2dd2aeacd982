//! Crate-wide error type.

use crate::feature_store::Violation;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A dataset line could not be parsed.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// The dataset violates catalog invariants.
    #[error("invalid catalog: {}", format_violations(.0))]
    InvalidCatalog(Vec<Violation>),

    #[error("unknown user {0:?}")]
    UnknownUser(String),

    #[error("unknown video {0:?}")]
    UnknownVideo(String),

    #[error("vector dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("noise scale must be finite and non-negative, got {0}")]
    InvalidScale(f64),

    #[error("importance weight {omega} outside [{floor}, 1]")]
    OmegaOutOfRange { omega: f64, floor: f64 },

    #[error("candidate list is empty")]
    EmptyCandidates,

    #[error("group member list is empty")]
    EmptyGroup,

    #[error(
        "privacy ledger exhausted: charge of {requested} exceeds remaining \
         budget {remaining:.6} (budget {budget}, consumed {consumed})"
    )]
    BudgetExhausted {
        requested: f64,
        remaining: f64,
        budget: f64,
        consumed: f64,
    },

    #[error("ledger charge must be positive, got {0}")]
    NonPositiveCharge(f64),

    #[error("training loss is not finite (degenerate data?)")]
    NonFiniteLoss,

    #[error("cluster count {k} invalid for {n} profiles")]
    BadClusterCount { k: usize, n: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

fn format_violations(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}
