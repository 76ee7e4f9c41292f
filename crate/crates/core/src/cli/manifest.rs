use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::CliError;
use crate::service::OPERATOR_TOKEN_ENV;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Complete,
    /// The command failed after writing some outputs; treat them as incomplete.
    Partial,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InputRecord {
    pub path: String,
    pub sha256: String,
}

/// Provenance record written next to every artifact.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub argv: Vec<String>,
    pub config: serde_json::Value,
    pub seeds: Vec<u64>,
    pub inputs: Vec<InputRecord>,
    pub outputs: Vec<String>,
    pub status: RunStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub started_unix_ms: u64,
    pub finished_unix_ms: u64,
}

fn now_ms() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::from_io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Collects provenance while a command runs.
#[derive(Debug)]
pub struct Run {
    manifest: RunManifest,
    path: Option<PathBuf>,
}

impl Run {
    pub fn new(command: &str, argv: Vec<String>) -> Self {
        let argv = redact(argv);
        Self {
            manifest: RunManifest {
                tool: env!("CARGO_PKG_NAME"),
                version: env!("CARGO_PKG_VERSION"),
                command: command.to_string(),
                argv,
                config: serde_json::Value::Null,
                seeds: Vec::new(),
                inputs: Vec::new(),
                outputs: Vec::new(),
                status: RunStatus::Complete,
                error: None,
                started_unix_ms: now_ms(),
                finished_unix_ms: 0,
            },
            path: None,
        }
    }

    /// Where the manifest will be written when the run finishes.
    pub fn write_to(&mut self, path: impl Into<PathBuf>) {
        self.path = Some(path.into());
    }

    pub fn config(&mut self, config: impl Serialize) {
        self.manifest.config = serde_json::to_value(config).expect("config serializes");
    }

    pub fn seeds(&mut self, seeds: &[u64]) {
        self.manifest.seeds = seeds.to_vec();
    }

    pub fn input(&mut self, path: &Path) -> Result<(), CliError> {
        let sha256 = sha256_file(path)?;
        self.manifest.inputs.push(InputRecord {
            path: path.display().to_string(),
            sha256,
        });
        Ok(())
    }

    pub fn output(&mut self, path: &Path) {
        self.manifest.outputs.push(path.display().to_string());
    }

    pub fn manifest(&self) -> &RunManifest {
        &self.manifest
    }

    pub fn finish(mut self, outcome: &Result<(), CliError>) -> Result<(), CliError> {
        let Some(path) = self.path.take() else {
            return Ok(());
        };
        if let Err(e) = outcome {
            self.manifest.status = if self.manifest.outputs.is_empty() {
                RunStatus::Failed
            } else {
                RunStatus::Partial
            };
            self.manifest.error = Some(e.to_string());
        }
        self.manifest.finished_unix_ms = now_ms();
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(|e| CliError::from_io(parent, e))?;
        }
        let text = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        std::fs::write(&path, text + "\n").map_err(|e| CliError::from_io(&path, e))
    }
}

/// Drops anything that looks like the operator token from the recorded argv.
fn redact(argv: Vec<String>) -> Vec<String> {
    match std::env::var(OPERATOR_TOKEN_ENV) {
        Ok(token) if !token.is_empty() => argv
            .into_iter()
            .map(|a| if a.contains(&token) { "<redacted>".into() } else { a })
            .collect(),
        _ => argv,
    }
}

/// `out.ext` -> `out.ext.manifest.json`.
pub fn sidecar(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    path.with_file_name(name)
}
