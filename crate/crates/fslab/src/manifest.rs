//! The run manifest: what was produced, from which config, and how long
//! each stage took.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StageStatus {
    Ok,
    Failed,
    Skipped,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub status: StageStatus,
    pub seconds: f64,
    pub message: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Versions {
    pub fslab: String,
    pub basis_order_version: u32,
    pub config_schema: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub seed: u64,
    pub versions: Versions,
    pub stages: Vec<StageRecord>,
    pub files: Vec<FileEntry>,
    pub total_seconds: f64,
}

impl RunManifest {
    pub fn failed(&self) -> bool {
        self.stages.iter().any(|s| s.status == StageStatus::Failed)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Checks that every listed file exists under `dir` with the listed hash.
pub fn verify_manifest(dir: &Path) -> Result<RunManifest, CliError> {
    let text = std::fs::read_to_string(dir.join(MANIFEST_NAME))?;
    let manifest: RunManifest = serde_json::from_str(&text)?;
    for f in &manifest.files {
        let bytes = std::fs::read(dir.join(&f.path))?;
        if sha256_hex(&bytes) != f.sha256 || bytes.len() as u64 != f.bytes {
            return Err(CliError::Check(format!("{} does not match the manifest", f.path)));
        }
    }
    Ok(manifest)
}
