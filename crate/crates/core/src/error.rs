use std::path::PathBuf;

/// Errors surfaced by the plant, actuator, controller, and harness layers.
#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("discretization unstable: {0}")]
    Stability(String),

    #[error("constraint violation: {0}")]
    Constraint(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("value out of range: {0}")]
    Range(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl SimError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        SimError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, SimError>;
