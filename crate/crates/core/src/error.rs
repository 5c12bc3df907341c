use std::path::PathBuf;

use crate::model::Violation;

/// Errors raised by the GEMM engine, the planner, the tuner and the profile loaders.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Conformance(String),

    #[error("invalid control tree: {}", format_violations(.0))]
    InvalidControlTree(Vec<Violation>),

    #[error(
        "dynamic scheduling over Loop 1 rejected: n_c is too large to dynamically distribute \
         the Loop 1 iteration space; use coarse Loop 3"
    )]
    DynamicLoop1,

    #[error("policy {policy} requires a coarse loop of {required}")]
    CoarseLoopRequired {
        policy: &'static str,
        required: &'static str,
    },

    #[error("ratio must be positive, got {0}")]
    NonPositiveRatio(String),

    #[error("policy {policy} expects {expected} control tree(s), got {got}")]
    TreeCount {
        policy: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid topology: {0}")]
    Topology(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("empty search: every candidate point was filtered out")]
    EmptySearch,

    #[error("{path}: {msg}")]
    Parse { path: PathBuf, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

fn format_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}
