//! Run manifests: every output file gets a sibling `<name>.manifest.json`
//! recording the resolved configuration, versions, seeds and timestamps, so
//! re-running the recorded invocation reproduces the output byte for byte.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use refocus_core::error::{Error, Result};

#[derive(Serialize)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    pub version: &'static str,
    pub seed: Option<u64>,
    pub unix_timestamp: u64,
    pub outputs: Vec<String>,
    pub config: serde_json::Value,
}

impl RunManifest {
    pub fn new(command: &str, argv: Vec<String>, seed: Option<u64>, outputs: &[&Path]) -> Self {
        RunManifest {
            command: command.to_string(),
            argv,
            version: env!("CARGO_PKG_VERSION"),
            seed,
            unix_timestamp: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
            config: serde_json::Value::Null,
        }
    }

    pub fn with_config(mut self, config: serde_json::Value) -> Self {
        self.config = config;
        self
    }

    /// Write next to the primary output: `<output>.manifest.json`.
    pub fn write(&self, primary_output: &Path) -> Result<PathBuf> {
        let mut name = primary_output
            .file_name()
            .unwrap_or_default()
            .to_os_string();
        name.push(".manifest.json");
        let path = primary_output.with_file_name(name);
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(&path, text + "\n")
            .map_err(|e| Error::InvalidArgument(format!("cannot write manifest: {e}")))?;
        Ok(path)
    }
}
