//! `manifest.json`: what was run, with which configuration, and what it wrote.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

pub const TOOL: &str = "kzquench";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Relative to the output directory.
    pub path: String,
    pub sha256: String,
    /// Data rows, header excluded.
    pub rows: usize,
}

impl FileEntry {
    pub fn describe(path: &str, contents: &str) -> Self {
        Self {
            path: path.to_string(),
            sha256: sha256_hex(contents.as_bytes()),
            rows: contents.lines().count().saturating_sub(1),
        }
    }

    pub fn matches(&self, contents: &str) -> bool {
        *self == Self::describe(&self.path, contents)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub total_seconds: f64,
    /// Wall-clock seconds per run, in `runs.csv` order.
    pub run_seconds: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: RunConfig,
    pub tau_grid: Vec<f64>,
    pub noise_grid: Vec<f64>,
    pub workers: usize,
    pub files: Vec<FileEntry>,
    pub timings: Timings,
}

impl RunManifest {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}
