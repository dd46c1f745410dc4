use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// The JSON state is structurally invalid (missing field, dangling
    /// pointer, duplicate id, ...).
    #[error("malformed state: {0}")]
    MalformedState(String),

    #[error("invalid SAI: {0}")]
    InvalidSai(String),

    /// No function composition explains the target. Callers bottom out.
    #[error("how-search found no explanation")]
    EmptySearch,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid problem spec: {0}")]
    Problem(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
