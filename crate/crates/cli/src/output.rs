use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_digest: String,
    pub master_seed: u64,
    pub artifacts: Vec<String>,
    pub tool_version: String,
}

/// Collects artifacts for one run and writes them, the canonical config and
/// the manifest into the output directory.
pub struct Artifacts {
    dir: PathBuf,
    files: Vec<(String, Vec<u8>)>,
}

/// Compact JSON with object keys in sorted order.
pub fn canonical_json<T: Serialize>(value: &T) -> Result<String, String> {
    let v = serde_json::to_value(value).map_err(|e| e.to_string())?;
    serde_json::to_string(&v).map_err(|e| e.to_string())
}

pub fn pretty_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serialisable report");
    s.push('\n');
    s
}

impl Artifacts {
    pub fn new(dir: &Path) -> Self {
        Self { dir: dir.to_path_buf(), files: Vec::new() }
    }

    pub fn add(&mut self, name: impl Into<String>, contents: impl Into<Vec<u8>>) {
        self.files.push((name.into(), contents.into()));
    }

    pub fn write<C: Serialize>(mut self, command: &str, config: &C, seed: u64) -> Result<(), String> {
        let canonical = canonical_json(config)?;
        let digest = hex::encode(Sha256::digest(canonical.as_bytes()));
        self.add("config.json", canonical);
        let manifest = RunManifest {
            command: command.to_string(),
            config_digest: digest,
            master_seed: seed,
            artifacts: self.files.iter().map(|(n, _)| n.clone()).collect(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        };
        self.add("manifest.json", pretty_json(&manifest));
        fs::create_dir_all(&self.dir).map_err(|e| format!("cannot create {}: {e}", self.dir.display()))?;
        for (name, bytes) in &self.files {
            let path = self.dir.join(name);
            fs::write(&path, bytes).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
        }
        Ok(())
    }
}
