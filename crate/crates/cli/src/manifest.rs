use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutputDigest {
    pub path: String,
    pub sha256: String,
}

/// Everything needed to rerun a command and check its outputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    /// Arguments after the program name.
    pub command_line: Vec<String>,
    pub version: String,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    pub seeds: Vec<u64>,
    pub resolved: serde_json::Value,
    pub outputs: Vec<OutputDigest>,
}

pub fn sha256_file(path: &Path) -> std::io::Result<String> {
    Ok(hex::encode(Sha256::digest(fs::read(path)?)))
}

impl RunManifest {
    pub fn new(seeds: Vec<u64>, resolved: serde_json::Value) -> Self {
        RunManifest {
            command_line: std::env::args().skip(1).collect(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
            seeds,
            resolved,
            outputs: Vec::new(),
        }
    }

    pub fn record(&mut self, path: &Path) -> std::io::Result<()> {
        self.outputs.push(OutputDigest { path: path.display().to_string(), sha256: sha256_file(path)? });
        Ok(())
    }

    /// Writes `<output>.manifest.json` next to `output`.
    pub fn write_beside(&self, output: &Path) -> std::io::Result<PathBuf> {
        let mut name = output.as_os_str().to_owned();
        name.push(".manifest.json");
        let path = PathBuf::from(name);
        fs::write(&path, serde_json::to_string_pretty(self).expect("manifest serialises") + "\n")?;
        Ok(path)
    }
}
