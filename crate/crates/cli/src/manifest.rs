//! Provenance record written next to every command's outputs.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    pub run: u64,
    pub split: u64,
    pub simulate: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_digest: String,
    pub toolkit_version: String,
    pub seeds: Seeds,
    /// Unix seconds.
    pub started_at: u64,
    pub finished_at: u64,
    /// Input path to SHA-256.
    pub inputs: BTreeMap<String, String>,
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// Streaming SHA-256 of a file, hex encoded.
pub fn file_digest(path: &Path) -> Result<String> {
    let mut file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

impl RunManifest {
    pub fn begin(command: &str, config: &ExperimentConfig) -> Self {
        Self {
            command: command.to_string(),
            config_digest: config.digest(),
            toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
            seeds: Seeds { run: config.seed, split: config.split.seed, simulate: config.simulate.seed },
            started_at: now(),
            finished_at: 0,
            inputs: BTreeMap::new(),
        }
    }

    /// Records the digest of an input file and returns it.
    pub fn add_input(&mut self, path: &Path) -> Result<String> {
        let digest = file_digest(path)?;
        self.inputs.insert(path.display().to_string(), digest.clone());
        Ok(digest)
    }

    /// Equal up to timestamps: two such runs must emit identical reports.
    pub fn same_run(&self, other: &Self) -> bool {
        self.command == other.command
            && self.config_digest == other.config_digest
            && self.toolkit_version == other.toolkit_version
            && self.seeds == other.seeds
            && self.inputs.values().eq(other.inputs.values())
    }

    /// Stamps the finish time and writes `<out>/manifests/<command>.json`.
    pub fn finish(mut self, out_dir: &Path) -> Result<PathBuf> {
        self.finished_at = now();
        let path = out_dir.join("manifests").join(format!("{}.json", self.command));
        crate::commands::write_json(&path, &self)?;
        Ok(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_of_known_content() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.txt");
        std::fs::write(&p, b"abc").unwrap();
        assert_eq!(
            file_digest(&p).unwrap(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn equality_ignores_timestamps() {
        let c = ExperimentConfig::default();
        let a = RunManifest::begin("run", &c);
        let mut b = a.clone();
        b.started_at += 10;
        assert!(a.same_run(&b));
        b.seeds.run = 7;
        assert!(!a.same_run(&b));
    }
}
