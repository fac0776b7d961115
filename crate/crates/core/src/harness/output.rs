use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

use super::config::RunConfig;

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputEntry {
    /// Relative to the output directory.
    pub path: String,
    pub sha256: String,
}

/// Writes files into one directory and remembers their checksums.
#[derive(Debug)]
pub struct OutputSet {
    dir: PathBuf,
    entries: Vec<OutputEntry>,
}

impl OutputSet {
    pub fn create(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            entries: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        std::fs::write(self.dir.join(name), contents)?;
        let entry = OutputEntry {
            path: name.to_string(),
            sha256: sha256_hex(contents.as_bytes()),
        };
        match self.entries.iter_mut().find(|e| e.path == name) {
            Some(e) => *e = entry,
            None => self.entries.push(entry),
        }
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, &text)
    }

    pub fn entries(&self) -> &[OutputEntry] {
        &self.entries
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Running,
    Complete,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Failure {
    pub realization: u64,
    pub stream_id: u64,
    pub error: String,
}

/// Noise streams used by a run: realization `k` draws from stream
/// `first + k` of the master seed; auxiliary runs use the streams after it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamRange {
    pub first: u64,
    pub count: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: RunConfig,
    pub code_version: String,
    pub master_seed: u64,
    pub streams: StreamRange,
    pub threads: usize,
    pub started_unix: f64,
    pub finished_unix: Option<f64>,
    pub wall_clock_seconds: Option<f64>,
    pub status: RunStatus,
    pub error: Option<String>,
    pub failures: Vec<Failure>,
    pub outputs: Vec<OutputEntry>,
}

pub(crate) fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

impl RunManifest {
    pub fn start(config: &RunConfig, streams: StreamRange, threads: usize) -> Self {
        Self {
            config: config.clone(),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            master_seed: config.master_seed,
            streams,
            threads,
            started_unix: unix_now(),
            finished_unix: None,
            wall_clock_seconds: None,
            status: RunStatus::Running,
            error: None,
            failures: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn finish(&mut self, status: RunStatus, outputs: &[OutputEntry]) {
        let now = unix_now();
        self.finished_unix = Some(now);
        self.wall_clock_seconds = Some(now - self.started_unix);
        self.status = status;
        self.outputs = outputs.to_vec();
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(dir.join(MANIFEST_FILE), text)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(dir.join(MANIFEST_FILE))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Recomputes every output checksum.
    pub fn verify(&self, dir: &Path) -> Result<()> {
        for entry in &self.outputs {
            let bytes = std::fs::read(dir.join(&entry.path))
                .map_err(|e| Error::Checksum(format!("{}: {e}", entry.path)))?;
            if sha256_hex(&bytes) != entry.sha256 {
                return Err(Error::Checksum(format!("{} does not match its recorded checksum", entry.path)));
            }
        }
        Ok(())
    }
}
