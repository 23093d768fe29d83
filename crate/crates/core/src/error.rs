use thiserror::Error;

use crate::group_core::Violation;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed input: {0}")]
    Parse(String),

    #[error("presentation is inconsistent: {}", format_violations(.0))]
    Inconsistent(Vec<Violation>),

    #[error("element does not match the presentation: {0}")]
    Shape(String),

    #[error("operation requires all main generators to have infinite order")]
    TorsionMainPart,

    #[error("commutator subgroup has Hirsch length {0}; this operation requires Hirsch length 1")]
    HirschLength(usize),

    #[error("entry {0} is not a member of the value set")]
    NotInSet(String),

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error("search budget of {0} states exceeded")]
    Budget(u64),

    #[error("internal invariant violated: {0}")]
    Internal(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

fn format_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}
