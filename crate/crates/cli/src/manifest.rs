//! Run manifest: which steps ran with which inputs and what they wrote.

use std::path::{Path, PathBuf};

use adequacy_core::{Error, Result};
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const FILE_NAME: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepStatus {
    Done,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub status: StepStatus,
    /// Hash of the config, step parameters and upstream keys.
    pub key: String,
    /// Paths relative to the output root.
    pub outputs: Vec<String>,
    pub cache_hit: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool_version: String,
    pub config_hash: String,
    pub seed: u64,
    pub scenarios: Vec<String>,
    /// Keyed by `<scenario>/<step>`.
    pub steps: IndexMap<String, StepRecord>,
}

impl Manifest {
    pub fn new(config_hash: String, seed: u64) -> Self {
        Manifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash,
            seed,
            scenarios: Vec::new(),
            steps: IndexMap::new(),
        }
    }

    /// Loads `root/manifest.json` if present. A manifest written for another
    /// config keeps its step records; their keys simply stop matching.
    pub fn load_or_new(root: &Path, config_hash: String, seed: u64) -> Result<Self> {
        let path = root.join(FILE_NAME);
        if !path.exists() {
            return Ok(Manifest::new(config_hash, seed));
        }
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let mut m: Manifest = serde_json::from_str(&text)?;
        m.config_hash = config_hash;
        m.seed = seed;
        m.tool_version = env!("CARGO_PKG_VERSION").to_string();
        Ok(m)
    }

    pub fn save(&self, root: &Path) -> Result<()> {
        std::fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
        let path = root.join(FILE_NAME);
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    /// A completed record with this key whose outputs all still exist.
    pub fn cached(&self, id: &str, key: &str, root: &Path) -> Option<&StepRecord> {
        self.steps
            .get(id)
            .filter(|r| r.key == key && r.outputs.iter().all(|p| root.join(p).exists()))
    }

    pub fn record(&mut self, id: String, record: StepRecord) {
        self.steps.insert(id, record);
    }
}

pub fn step_key(parts: &[&str]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p.as_bytes());
        h.update([0u8]);
    }
    hex::encode(h.finalize())
}

/// `path` relative to `root`, with forward slashes.
pub fn relative(root: &Path, path: &Path) -> String {
    let rel: PathBuf = path.strip_prefix(root).unwrap_or(path).to_path_buf();
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join("/")
}
