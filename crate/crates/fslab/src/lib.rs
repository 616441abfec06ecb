//! Batch driver for the `fslab-core` experiments: configuration, the staged
//! pipeline, the invariant suite and the matrix decomposition helper.

pub mod config;
pub mod decompose;
pub mod manifest;
pub mod pipeline;
pub mod verify;

use thiserror::Error;

pub use config::RunConfig;
pub use manifest::RunManifest;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad arguments, configuration or input files.
    #[error("{0}")]
    Usage(String),

    /// A check or experiment ran and failed.
    #[error("{0}")]
    Check(String),

    #[error(transparent)]
    Core(#[from] fslab_core::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}
