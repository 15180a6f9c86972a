use thiserror::Error;

use crate::solution::Solution;

#[derive(Debug, Error)]
pub enum LpError {
    #[error("malformed model: {0}")]
    MalformedModel(String),

    /// Branch-and-bound gave up; the best integral point found so far, if
    /// any, is attached.
    #[error("branch-and-bound node limit of {limit} exceeded")]
    NodeLimitExceeded {
        limit: usize,
        incumbent: Option<Box<Solution>>,
    },

    #[error("simplex iteration limit of {0} exceeded")]
    IterationLimit(usize),

    #[error("numerical trouble: {0}")]
    Numerical(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}
