//! Run manifests: what was run, with which inputs, and checksums of every output.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{HarnessError, Result};
use crate::output::Format;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Path relative to the output directory.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub seed: u64,
    pub workers: usize,
    pub format: Format,
    /// Fully resolved config; loading it reproduces the run.
    pub config_toml: String,
    pub files: Vec<FileEntry>,
    /// Ensemble-level failures that did not stop the run.
    pub errors: Vec<String>,
    pub started_unix: u64,
    pub elapsed_seconds: f64,
}

pub fn checksum(path: &Path) -> Result<FileEntry> {
    let bytes = fs::read(path).map_err(|e| HarnessError::io(path, e))?;
    Ok(FileEntry {
        path: path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default(),
        sha256: hex::encode(Sha256::digest(&bytes)),
        bytes: bytes.len() as u64,
    })
}

impl RunManifest {
    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(self).map_err(|e| HarnessError::Serialize {
            path: path.clone(),
            reason: e.to_string(),
        })?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| HarnessError::io(&path, e))
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| HarnessError::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| HarnessError::Serialize {
            path,
            reason: e.to_string(),
        })
    }

    /// Files in `dir` whose size or checksum no longer matches the manifest.
    pub fn verify(&self, dir: &Path) -> Result<Vec<String>> {
        let mut mismatched = Vec::new();
        for entry in &self.files {
            let actual = checksum(&dir.join(&entry.path))?;
            if actual.sha256 != entry.sha256 || actual.bytes != entry.bytes {
                mismatched.push(entry.path.clone());
            }
        }
        Ok(mismatched)
    }
}
