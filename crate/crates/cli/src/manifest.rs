//! Run manifests: what went in, what came out, and with which settings.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::{Path, PathBuf};

use bcaid_core::{Error, Result};
use chrono::{DateTime, SecondsFormat, Utc};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize)]
pub struct InputFile {
    pub role: String,
    pub path: PathBuf,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Serialize)]
pub struct Failure {
    pub code: String,
    pub message: String,
    pub exit_code: u8,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub argv: Vec<String>,
    pub started_at: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub finished_at: Option<String>,
    pub status: &'static str,
    pub versions: BTreeMap<String, String>,
    pub inputs: Vec<InputFile>,
    pub seeds: BTreeMap<String, u64>,
    pub parameters: BTreeMap<String, Value>,
    pub counts: BTreeMap<String, Value>,
    pub outputs: Vec<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<Failure>,
}

fn stamp(t: DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Secs, true)
}

impl Manifest {
    pub fn new(command: &str) -> Self {
        let mut versions = BTreeMap::new();
        versions.insert("bcaid".into(), env!("CARGO_PKG_VERSION").into());
        let prompts: Vec<String> = bcaid_core::prompts::all().iter().map(|t| t.id()).collect();
        versions.insert("prompts".into(), prompts.join(","));
        Self {
            command: command.into(),
            argv: std::env::args().collect(),
            started_at: stamp(Utc::now()),
            finished_at: None,
            status: "running",
            versions,
            inputs: Vec::new(),
            seeds: BTreeMap::new(),
            parameters: BTreeMap::new(),
            counts: BTreeMap::new(),
            outputs: Vec::new(),
            error: None,
        }
    }

    /// Records `path` with its digest.
    pub fn input(&mut self, role: &str, path: &Path) -> Result<()> {
        let mut file = std::fs::File::open(path)
            .map_err(|e| Error::Config(format!("cannot open {}: {e}", path.display())))?;
        let mut hasher = Sha256::new();
        let mut buf = vec![0u8; 1 << 16];
        let mut bytes = 0u64;
        loop {
            let n = file.read(&mut buf)?;
            if n == 0 {
                break;
            }
            hasher.update(&buf[..n]);
            bytes += n as u64;
        }
        self.inputs.push(InputFile {
            role: role.into(),
            path: path.to_path_buf(),
            sha256: hex::encode(hasher.finalize()),
            bytes,
        });
        Ok(())
    }

    pub fn param(&mut self, key: &str, value: impl Serialize) {
        self.parameters.insert(key.into(), serde_json::to_value(value).unwrap_or(Value::Null));
    }

    pub fn count(&mut self, key: &str, value: impl Serialize) {
        self.counts.insert(key.into(), serde_json::to_value(value).unwrap_or(Value::Null));
    }

    pub fn version(&mut self, key: &str, value: impl Into<String>) {
        self.versions.insert(key.into(), value.into());
    }

    pub fn finish(&mut self, outcome: &std::result::Result<(), (Error, u8)>) {
        self.finished_at = Some(stamp(Utc::now()));
        match outcome {
            Ok(()) => self.status = "ok",
            Err((e, exit_code)) => {
                self.status = "failed";
                self.error = Some(Failure {
                    code: e.code().into(),
                    message: e.to_string(),
                    exit_code: *exit_code,
                });
            }
        }
    }

    pub fn write(&self, out: &Path) -> Result<PathBuf> {
        let dir = out.join("manifests");
        std::fs::create_dir_all(&dir)?;
        let path = dir.join(format!("{}.json", self.command));
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(&path, text)?;
        Ok(path)
    }
}
