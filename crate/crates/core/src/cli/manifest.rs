// SPDX-License-Identifier: Apache-2.0

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Record of one CLI invocation and the files it produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    /// SHA-256 of the resolved config (or sweep definition).
    pub config_hash: Option<String>,
    pub seeds: Vec<u64>,
    pub started_at: String,
    pub finished_at: Option<String>,
    pub status: String,
    pub artifacts: Vec<PathBuf>,
}

pub(crate) fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

impl RunManifest {
    pub fn start(command: &str, config_hash: Option<String>, seeds: Vec<u64>) -> Self {
        Self {
            command: command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash,
            seeds,
            started_at: now(),
            finished_at: None,
            status: "running".into(),
            artifacts: Vec::new(),
        }
    }

    pub fn add(&mut self, path: &Path) {
        if !self.artifacts.iter().any(|p| p == path) {
            self.artifacts.push(path.to_path_buf());
        }
    }

    pub fn finish(&mut self, status: &str) {
        self.finished_at = Some(now());
        self.status = status.to_string();
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut w, self)?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_reader(std::io::BufReader::new(File::open(path)?))?)
    }
}
