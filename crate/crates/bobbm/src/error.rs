//! Crate-wide error type with distinct process exit codes for the CLI.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("multiplier violates reality: m(-n) != conj(m(n)) at n = {n}")]
    RealityViolation { n: i64 },

    #[error("config parse error: {0}")]
    ConfigParse(String),

    #[error("schema version mismatch: found {found}, supported {supported}")]
    SchemaMismatch { found: u32, supported: u32 },

    #[error("unknown experiment kind: {0}")]
    UnknownKind(String),

    #[error("output not writable: {path}: {source}")]
    OutputWrite {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("flow diverged (non-finite state) at t = {t}; reduce dt")]
    FlowDiverged { t: f64 },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable exit code per failure class, used by the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParam(_) => 2,
            Error::RealityViolation { .. } => 2,
            Error::ConfigParse(_) => 3,
            Error::SchemaMismatch { .. } => 4,
            Error::UnknownKind(_) => 5,
            Error::OutputWrite { .. } => 6,
            Error::FlowDiverged { .. } => 7,
            Error::DegenerateFit(_) => 8,
            Error::Io(_) => 9,
            Error::Json(_) => 10,
        }
    }
}
