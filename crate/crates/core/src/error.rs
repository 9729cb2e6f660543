use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("cannot build a line from two identical points {0:?}")]
    IdenticalPoints(Vec<i32>),

    #[error("point {point:?} lies outside [1, {n}]^{d}")]
    OutOfGrid { point: Vec<i32>, n: u32, d: usize },

    /// Resampling or retry budget ran out before every bad event was cleared.
    #[error("budget exhausted at stage {stage} after {resamples} resamplings ({unresolved} bad events left)")]
    BudgetExhausted {
        stage: usize,
        resamples: u64,
        unresolved: usize,
    },

    #[error("block ({row}, {col}) failed: {source}")]
    Block {
        row: usize,
        col: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("malformed point set: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParams(msg.into())
    }

    /// True for the errors a caller may cure by retrying with a fresh seed.
    pub fn is_budget(&self) -> bool {
        match self {
            Error::BudgetExhausted { .. } => true,
            Error::Block { source, .. } => source.is_budget(),
            _ => false,
        }
    }
}
