use thiserror::Error;

/// Errors produced by the geometry, fitting, loss and I/O layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate shape: {0}")]
    DegenerateShape(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed annotation: {0}")]
    MalformedAnnotation(String),

    #[error("singular fit: condition number {condition:.3e} exceeds {limit:.0e}")]
    SingularFit { condition: f64, limit: f64 },

    #[error("no valid instances in corpus")]
    EmptyCorpus,

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("image error: {0}")]
    Image(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
