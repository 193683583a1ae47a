//! Run manifests: everything needed to reproduce a run, plus digests of what it wrote.

use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    /// Subcommand name.
    pub command: String,
    /// Canonical argument vector with every flag spelled out.
    pub args: Vec<String>,
    /// The resolved subcommand configuration.
    pub config: serde_json::Value,
    /// Input file path → sha256.
    pub inputs: BTreeMap<String, String>,
    /// Output file name (relative to the output directory) → sha256.
    pub outputs: BTreeMap<String, String>,
}

pub fn sha256_file(path: &Path) -> std::io::Result<String> {
    let mut file = fs::File::open(path)?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 1 << 16];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hasher.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

impl RunManifest {
    pub fn read(path: &Path) -> std::io::Result<Self> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(std::io::Error::other)
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        let mut text = serde_json::to_string_pretty(self).map_err(std::io::Error::other)?;
        text.push('\n');
        fs::write(path, text)
    }

    /// Files whose digest differs from the recorded one (or that are missing) under `dir`.
    pub fn mismatches(&self, dir: &Path) -> Vec<String> {
        self.outputs
            .iter()
            .filter(|(name, digest)| sha256_file(&dir.join(name)).ok().as_deref() != Some(digest.as_str()))
            .map(|(name, _)| name.clone())
            .collect()
    }
}
