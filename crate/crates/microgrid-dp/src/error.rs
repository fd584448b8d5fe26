use std::path::PathBuf;

use crate::model::Action;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// A single violated configuration constraint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: &'static str,
    pub constraint: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.constraint)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration:\n{}", format_violations(.0))]
    Validation(Vec<Violation>),

    #[error("{context} ({path}): {source}")]
    Io {
        context: &'static str,
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed input in {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("action {action} is not feasible at step {step}, state {state}")]
    Infeasible {
        step: usize,
        state: usize,
        action: Action,
    },

    #[error("no feasible action at step {step}, state {state}")]
    EmptyFeasibleSet { step: usize, state: usize },

    #[error("transition row at step {step}, state {state}, action {action} sums to {sum}")]
    NonNormalizing {
        step: usize,
        state: usize,
        action: Action,
        sum: f64,
    },

    #[error("covariance matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("non-finite value at step {step}, state {state}")]
    NonFinite { step: usize, state: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    /// Whether the error comes from a numerical failure rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonNormalizing { .. }
                | Error::NotPositiveDefinite(_)
                | Error::NonFinite { .. }
                | Error::EmptyFeasibleSet { .. }
                | Error::Infeasible { .. }
        )
    }
}

fn format_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|x| format!("  - {x}"))
        .collect::<Vec<_>>()
        .join("\n")
}
