use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("row {line}: {reason}")]
    Row { line: usize, reason: String },

    #[error("input is empty")]
    EmptyInput,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("profile of {len} items cannot hold {n_val} validation + {n_test} test items and a fold-in")]
    IneligibleProfile { len: usize, n_val: usize, n_test: usize },

    #[error("fold {fold} has no eligible evaluation users")]
    DegenerateFold { fold: usize },

    #[error("cold start: empty fold-in vector")]
    ColdStart,

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("resource limit: {0}")]
    Resource(String),

    #[error("search budget: {0}")]
    Budget(String),

    #[error("optimization failed: {0}")]
    Optimization(String),

    // the cause is part of the message, so it is not exposed as a source too
    #[error("fold {fold}: {cause}")]
    InFold {
        fold: usize,
        cause: Box<Error>,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn in_fold(self, fold: usize) -> Self {
        Error::InFold { fold, cause: Box::new(self) }
    }
}
