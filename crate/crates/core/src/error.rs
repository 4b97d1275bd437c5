use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("numeric error: {what} (achieved tolerance {achieved:e})")]
    Numeric { what: String, achieved: f64 },

    #[error("solver diverged after {iterations} iterations: {reason}")]
    Diverged { iterations: usize, reason: String },

    #[error("box too small: outer-shell amplitude ratio {ratio:e} exceeds {limit:e}")]
    BoxTooSmall { ratio: f64, limit: f64 },

    #[error("Pohozaev set unreachable: {0}")]
    Unreachable(String),

    #[error("no dilation onto the Pohozaev set: {0}")]
    NoDilation(String),

    #[error("non-convergence: {0}")]
    NonConvergence(String),

    #[error("continuation stage {stage} (eps = {eps:e}) failed: {source}")]
    Stage {
        stage: usize,
        eps: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("landscape error: {0}")]
    Landscape(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn degenerate(msg: impl Into<String>) -> Self {
        Error::Degenerate(msg.into())
    }
}
