use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("invalid allocation: {0}")]
    InvalidAllocation(String),

    #[error("{0}")]
    Unsupported(String),

    #[error("instance too large for exact oracle: {total} allocations exceed cap {cap}")]
    OracleTooLarge { total: u128, cap: u64 },

    #[error("network needs at least {min_agents} agents for this architecture, got {agents}")]
    InfeasibleHeight { agents: usize, min_agents: usize },

    #[error("training diverged at epoch {epoch}, batch {batch}: loss is {loss}")]
    Diverged { epoch: usize, batch: usize, loss: f32 },

    #[error("bad model file: {0}")]
    BadMagic(String),

    #[error("unsupported version {found} (expected {expected})")]
    UnsupportedVersion { found: u32, expected: u32 },

    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    ChecksumMismatch { stored: u32, computed: u32 },

    #[error("corrupt model file: {0}")]
    CorruptModel(String),

    #[error("missing model files: {}", .0.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(", "))]
    MissingModels(Vec<PathBuf>),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("I/O error: {0}")]
    Io(#[from] io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Stable machine-readable tag for structured error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInstance(_) => "invalid_instance",
            Error::InvalidAllocation(_) => "invalid_allocation",
            Error::Unsupported(_) => "unsupported",
            Error::OracleTooLarge { .. } => "oracle_too_large",
            Error::InfeasibleHeight { .. } => "infeasible_height",
            Error::Diverged { .. } => "diverged",
            Error::BadMagic(_) => "bad_magic",
            Error::UnsupportedVersion { .. } => "unsupported_version",
            Error::ChecksumMismatch { .. } => "checksum_mismatch",
            Error::CorruptModel(_) => "corrupt_model",
            Error::MissingModels(_) => "missing_models",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}
