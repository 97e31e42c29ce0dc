use thiserror::Error;

/// Errors raised by every stage of the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty set: {0}")]
    EmptySet(&'static str),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("enumeration budget of {budget} nodes exceeded after {partial} results")]
    BudgetExceeded { budget: u64, partial: u64 },
    #[error("nothing found within radius {radius}: {what}")]
    NotFound { what: String, radius: usize },
    #[error("gluing failed: {0}")]
    GlueFailed(String),
    #[error("count shortfall: {0}")]
    Shortfall(String),
    #[error("tiling: {0}")]
    Tiling(String),
    #[error("marker condition ({0}) fails: {1}")]
    MarkerCondition(char, String),
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn in_stage(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
