use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;

/// Record of one run. Everything except `timestamp` is a function of the
/// command line and config file, so reruns differ only in that field.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub resolved_config: Value,
    pub seed: u64,
    pub version: String,
    pub outputs: Vec<String>,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
}

impl Manifest {
    pub fn new(command: &str, resolved_config: Value, seed: u64) -> Self {
        let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        Self {
            command: command.to_owned(),
            resolved_config,
            seed,
            version: env!("CARGO_PKG_VERSION").to_owned(),
            outputs: Vec::new(),
            timestamp,
        }
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        gmmot::io::write_json(self, path).with_context(|| format!("writing manifest {}", path.display()))
    }
}

/// `dir/manifest.json` for directory outputs.
pub fn in_dir(dir: &Path) -> PathBuf {
    dir.join("manifest.json")
}

/// `name.manifest.json` next to a single output file `name.ext`.
pub fn beside(file: &Path) -> PathBuf {
    let stem = file.file_stem().map_or_else(|| "output".into(), |s| s.to_string_lossy().into_owned());
    file.with_file_name(format!("{stem}.manifest.json"))
}
