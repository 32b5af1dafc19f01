use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Digest of one file read during a run.
#[derive(Debug, Clone, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

/// Record of a run: subcommand, fully defaulted configuration, inputs and outputs.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub config: serde_json::Value,
    pub inputs: Vec<InputDigest>,
    pub outputs: Vec<String>,
}

/// Input missing or unreadable; reported as a usage error.
#[derive(Debug)]
pub struct Usage(pub String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

pub fn usage(message: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(Usage(message.into()))
}

/// Tracks the files a subcommand touches.
#[derive(Debug)]
pub struct Run {
    manifest: RunManifest,
    target: Option<PathBuf>,
}

impl Run {
    pub fn new(subcommand: &str, target: Option<PathBuf>) -> Self {
        Self {
            manifest: RunManifest {
                subcommand: subcommand.to_string(),
                config: serde_json::Value::Null,
                inputs: Vec::new(),
                outputs: Vec::new(),
            },
            target,
        }
    }

    pub fn read(&mut self, path: &Path) -> Result<String> {
        let bytes = fs::read(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
        self.manifest.inputs.push(InputDigest {
            path: path.display().to_string(),
            sha256: hex::encode(Sha256::digest(&bytes)),
        });
        String::from_utf8(bytes).with_context(|| format!("{} is not UTF-8", path.display()))
    }

    pub fn write(&mut self, path: &Path, contents: &str) -> Result<()> {
        fs::write(path, contents).with_context(|| format!("writing {}", path.display()))?;
        self.manifest.outputs.push(path.display().to_string());
        if self.target.is_none() {
            self.target = Some(sidecar(path));
        }
        Ok(())
    }

    pub fn configure(&mut self, config: serde_json::Value) {
        self.manifest.config = config;
    }

    /// Writes the manifest to `--manifest`, or next to the first output.
    pub fn finish(self) -> Result<()> {
        let Some(path) = self.target else {
            return Ok(());
        };
        let text = serde_json::to_string_pretty(&self.manifest)? + "\n";
        fs::write(&path, text).with_context(|| format!("writing manifest {}", path.display()))
    }
}

fn sidecar(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}
