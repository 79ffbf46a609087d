//! Run manifests written next to every artifact a command produces.

use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

pub const MANIFEST_FORMAT: &str = "session-miner-manifest";

#[derive(Debug, Clone, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

impl FileDigest {
    pub fn of(path: &Path, content: &[u8]) -> Self {
        Self { path: path.display().to_string(), sha256: hex::encode(Sha256::digest(content)), bytes: content.len() }
    }
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub fmt: &'static str,
    pub v: u32,
    pub command: &'static str,
    pub tool_version: &'static str,
    pub seed: Option<u64>,
    pub catalogs: Vec<String>,
    pub jobs: usize,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub started_at: String,
    pub finished_at: String,
}

/// Collects digests while a command runs; `finish` writes the manifest.
pub struct Recorder {
    manifest: RunManifest,
}

impl Recorder {
    pub fn start(command: &'static str, jobs: usize) -> Self {
        Self {
            manifest: RunManifest {
                fmt: MANIFEST_FORMAT,
                v: 1,
                command,
                tool_version: env!("CARGO_PKG_VERSION"),
                seed: None,
                catalogs: Vec::new(),
                jobs,
                inputs: Vec::new(),
                outputs: Vec::new(),
                started_at: now(),
                finished_at: String::new(),
            },
        }
    }

    pub fn seed(&mut self, seed: u64) {
        self.manifest.seed = Some(seed);
    }

    pub fn catalog(&mut self, name: &str) {
        if !self.manifest.catalogs.iter().any(|c| c == name) {
            self.manifest.catalogs.push(name.to_string());
        }
    }

    pub fn read(&mut self, path: &Path) -> Result<Vec<u8>, CliError> {
        let bytes = std::fs::read(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
        self.manifest.inputs.push(FileDigest::of(path, &bytes));
        Ok(bytes)
    }

    pub fn write(&mut self, path: &Path, content: &[u8]) -> Result<(), CliError> {
        write_file(path, content)?;
        self.manifest.outputs.push(FileDigest::of(path, content));
        Ok(())
    }

    /// Writes the manifest to `path`.
    pub fn finish(mut self, path: &Path) -> Result<(), CliError> {
        self.manifest.finished_at = now();
        let mut json = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        json.push('\n');
        write_file(path, json.as_bytes())
    }
}

/// `<out>.manifest.json`.
pub fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

fn write_file(path: &Path, content: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.to_path_buf(), source })?;
    }
    std::fs::write(path, content).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}
