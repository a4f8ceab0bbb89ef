//! Run directories: `<out>/<timestamp>-seed<N>-<command>/`, each holding the
//! resolved `config.toml` and a `run.json` describing the invocation.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{self, AppError, Result};

#[derive(Debug, Clone, Serialize)]
pub struct RunInfo {
    pub command: String,
    pub seed: u64,
    pub crate_version: String,
    pub detector_architecture: String,
    pub started: String,
    pub args: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct RunDir {
    path: PathBuf,
}

impl RunDir {
    /// Creates a fresh run directory below `out`, or uses `exact` as is.
    pub fn create(out: &Path, command: &str, seed: u64, exact: Option<&Path>) -> Result<Self> {
        let path = match exact {
            Some(p) => p.to_path_buf(),
            None => {
                let stamp = chrono::Local::now().format("%Y%m%dT%H%M%S");
                let base = format!("{stamp}-seed{seed}-{command}");
                let mut path = out.join(&base);
                let mut n = 1;
                while path.exists() {
                    path = out.join(format!("{base}-{n}"));
                    n += 1;
                }
                path
            }
        };
        std::fs::create_dir_all(&path).map_err(|e| AppError::Io { path: path.clone(), source: e })?;
        Ok(Self { path })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.path.join(name)
    }

    pub fn write_snapshot(&self, config: &RunConfig, command: &str, args: Vec<String>) -> Result<()> {
        error::write(&self.file("config.toml"), config.to_toml())?;
        let info = RunInfo {
            command: command.into(),
            seed: config.seed,
            crate_version: env!("CARGO_PKG_VERSION").into(),
            detector_architecture: aerocamo_core::detector::ARCHITECTURE_TAG.into(),
            started: chrono::Local::now().to_rfc3339(),
            args,
        };
        error::write_json(&self.file("run.json"), &info)
    }
}
