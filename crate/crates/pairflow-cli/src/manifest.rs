//! Reproducibility manifests written alongside every output artifact.
//!
//! A manifest records the command, its fully resolved flags, the master
//! seed, SHA-256 digests of all inputs and outputs, the toolkit version,
//! and the wall-clock duration. Re-running the command with the same
//! inputs and flags reproduces every output byte for byte; the digests
//! make that checkable after the fact.

use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub flags: serde_json::Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub master_seed: Option<u64>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub duration_seconds: f64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, flags: serde_json::Value, master_seed: Option<u64>) -> Self {
        RunManifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            flags,
            master_seed,
            inputs: Vec::new(),
            outputs: Vec::new(),
            duration_seconds: 0.0,
            notes: Vec::new(),
        }
    }

    pub fn add_input(&mut self, path: &Path) -> Result<(), CliError> {
        self.inputs.push(digest_file(path)?);
        Ok(())
    }

    pub fn add_output(&mut self, path: &Path) -> Result<(), CliError> {
        self.outputs.push(digest_file(path)?);
        Ok(())
    }

    pub fn add_note(&mut self, note: impl Into<String>) {
        self.notes.push(note.into());
    }

    /// Writes `<artifact>.manifest.json` and returns its path.
    pub fn write_alongside(
        mut self,
        artifact: &Path,
        started: Instant,
    ) -> Result<PathBuf, CliError> {
        self.duration_seconds = started.elapsed().as_secs_f64();
        let path = PathBuf::from(format!("{}.manifest.json", artifact.display()));
        let body = serde_json::to_string_pretty(&self)
            .map_err(|e| CliError::Numeric(format!("serialize manifest: {e}")))?;
        std::fs::write(&path, body + "\n")
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Ok(path)
    }
}

fn digest_file(path: &Path) -> Result<FileDigest, CliError> {
    let io_err = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    let mut file = File::open(path).map_err(io_err)?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    let mut total = 0u64;
    loop {
        let n = file.read(&mut buf).map_err(io_err)?;
        if n == 0 {
            break;
        }
        total += n as u64;
        hasher.update(&buf[..n]);
    }
    let sha256 = hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect::<String>();
    Ok(FileDigest {
        path: path.display().to_string(),
        bytes: total,
        sha256,
    })
}
