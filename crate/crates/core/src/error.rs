use std::fmt;

use thiserror::Error;

/// A single broken invariant found by [`JointDistribution::validate`].
///
/// [`JointDistribution::validate`]: crate::dist::JointDistribution::validate
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NegativeEntry {
        index: usize,
        value: f64,
    },
    /// Signed shortfall `1 - sum`.
    NotNormalized {
        deficit: f64,
    },
    ShapeMismatch {
        expected: usize,
        actual: usize,
    },
    NonFinite {
        index: usize,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NegativeEntry { index, value } => {
                write!(f, "negative entry {value} at index {index}")
            }
            Violation::NotNormalized { deficit } => {
                write!(f, "probabilities do not sum to 1 (deficit {deficit:e})")
            }
            Violation::ShapeMismatch { expected, actual } => {
                write!(
                    f,
                    "table has {actual} entries, alphabets require {expected}"
                )
            }
            Violation::NonFinite { index } => write!(f, "non-finite entry at index {index}"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("variable sets overlap on `{0}`")]
    OverlappingSets(String),
    #[error("duplicate variable `{0}`")]
    DuplicateVariable(String),
    #[error("empty variable set")]
    EmptyVariableSet,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid alphabet `{name}`: {reason}")]
    InvalidAlphabet { name: String, reason: String },
    #[error("invalid distribution: {}", join_violations(.0))]
    InvalidDistribution(Vec<Violation>),
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),
    #[error("kernel input alphabet has size {kernel}, variable `{variable}` has size {actual}")]
    AlphabetMismatch {
        variable: String,
        kernel: usize,
        actual: usize,
    },
    #[error("size budget exceeded: {what} needs {required}, budget is {budget}")]
    SizeBudgetExceeded {
        what: &'static str,
        required: u128,
        budget: u128,
    },
    #[error("distribution is not bi-disjoint across {cut}; use the purified merging rate instead")]
    NotBiDisjoint { cut: String },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("parse error in {path}: {reason}")]
    Parse { path: String, reason: String },
    #[error("cannot write {path}: {reason}")]
    Write { path: String, reason: String },
}

fn join_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

pub type Result<T> = std::result::Result<T, Error>;
