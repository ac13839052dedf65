//! Run manifests: every command writes one JSON manifest describing what it
//! did, and every output file references the manifest ID that produced it.
//!
//! The ID hashes only the run's deterministic identity (tool version,
//! command, config snapshot, input digests, seed), never the timestamp, so
//! a rerun with the same inputs produces byte-identical data files and the
//! same ID while the manifest still records when it happened.

use serde::Serialize;
use sha2::{Digest, Sha256};
use std::path::Path;
use std::time::Instant;

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

pub fn hash_file(path: impl AsRef<Path>) -> std::io::Result<String> {
    Ok(sha256_hex(&std::fs::read(path)?))
}

#[derive(Debug, Clone, Serialize)]
pub struct FileRef {
    pub role: String,
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub id: String,
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub created: String,
    pub duration_seconds: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub config: serde_json::Value,
    pub inputs: Vec<FileRef>,
    pub outputs: Vec<String>,
    pub warnings: Vec<String>,
}

pub struct ManifestBuilder {
    command: String,
    config: serde_json::Value,
    seed: Option<u64>,
    inputs: Vec<FileRef>,
    outputs: Vec<String>,
    warnings: Vec<String>,
    started: Instant,
}

impl ManifestBuilder {
    pub fn new(command: &str, config: serde_json::Value, seed: Option<u64>) -> Self {
        Self {
            command: command.to_string(),
            config,
            seed,
            inputs: Vec::new(),
            outputs: Vec::new(),
            warnings: Vec::new(),
            started: Instant::now(),
        }
    }

    pub fn input(&mut self, role: &str, path: &Path) -> std::io::Result<()> {
        self.inputs.push(FileRef {
            role: role.to_string(),
            path: path.display().to_string(),
            sha256: hash_file(path)?,
        });
        Ok(())
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    pub fn warn(&mut self, message: impl Into<String>) {
        self.warnings.push(message.into());
    }

    /// Deterministic run identity (first 16 hex digits of the digest).
    ///
    /// Path-valued config fields are dropped before hashing: where a file
    /// lives is location metadata, and its content already enters through
    /// the input digests. Reruns on identical content are identical runs.
    pub fn id(&self) -> String {
        let mut config = self.config.clone();
        if let Some(map) = config.as_object_mut() {
            for key in ["data", "model", "tables", "out", "certificates"] {
                map.remove(key);
            }
        }
        let mut hasher = Sha256::new();
        hasher.update(env!("CARGO_PKG_VERSION").as_bytes());
        hasher.update(self.command.as_bytes());
        hasher.update(config.to_string().as_bytes());
        for input in &self.inputs {
            hasher.update(input.role.as_bytes());
            hasher.update(input.sha256.as_bytes());
        }
        if let Some(seed) = self.seed {
            hasher.update(seed.to_le_bytes());
        }
        let digest = hasher.finalize();
        digest
            .iter()
            .take(8)
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn write(self, path: &Path) -> std::io::Result<()> {
        let manifest = RunManifest {
            id: self.id(),
            tool: "rbaudit",
            version: env!("CARGO_PKG_VERSION"),
            command: self.command,
            created: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            duration_seconds: self.started.elapsed().as_secs_f64(),
            seed: self.seed,
            config: self.config,
            inputs: self.inputs,
            outputs: self.outputs,
            warnings: self.warnings,
        };
        std::fs::write(path, serde_json::to_string_pretty(&manifest).expect("serializable"))
    }
}
