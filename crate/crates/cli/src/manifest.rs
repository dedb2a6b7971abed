//! `manifest.json`: what a command read, what it wrote, and how.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::Globals;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub v: u32,
    pub command: String,
    pub config: serde_json::Value,
    pub seed: u64,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub tool_version: String,
    pub started_unix_s: u64,
    pub duration_s: f64,
}

pub fn digest_file(path: &Path) -> Result<FileDigest> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(FileDigest {
        path: path.display().to_string(),
        sha256: hex::encode(Sha256::digest(&bytes)),
        bytes: bytes.len() as u64,
    })
}

/// Collects the files a command touches; [`Recorder::finish`] writes the
/// manifest.
#[derive(Debug, Default)]
pub struct Recorder {
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

impl Recorder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn input(&mut self, path: impl Into<PathBuf>) {
        let path = path.into();
        if !self.inputs.contains(&path) {
            self.inputs.push(path);
        }
    }

    /// Registers an output, relative to the output directory.
    pub fn output(&mut self, rel: impl Into<PathBuf>) {
        let rel = rel.into();
        if !self.outputs.contains(&rel) {
            self.outputs.push(rel);
        }
    }

    pub fn finish<C: Serialize>(
        self,
        globals: &Globals,
        command: &str,
        seed: u64,
        config: &C,
    ) -> Result<RunManifest> {
        let inputs = self
            .inputs
            .iter()
            .map(|p| digest_file(p))
            .collect::<Result<Vec<_>>>()?;
        let mut outputs = Vec::with_capacity(self.outputs.len());
        for rel in &self.outputs {
            let mut d = digest_file(&globals.out.join(rel))?;
            d.path = rel.display().to_string();
            outputs.push(d);
        }
        let started = SystemTime::now()
            .checked_sub(globals.started.elapsed())
            .unwrap_or(UNIX_EPOCH);
        let manifest = RunManifest {
            v: MANIFEST_VERSION,
            command: command.to_string(),
            config: serde_json::to_value(config).context("serializing the config snapshot")?,
            seed,
            inputs,
            outputs,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            started_unix_s: started
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
            duration_s: globals.started.elapsed().as_secs_f64(),
        };
        crate::io::write_json(&globals.out.join(MANIFEST_FILE), &manifest)?;
        Ok(manifest)
    }
}
