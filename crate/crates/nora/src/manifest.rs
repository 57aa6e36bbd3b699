//! Per-run artifact directory with a manifest that makes the run repeatable.
//!
//! The manifest is written first with `status = "incomplete"` and rewritten
//! as `"complete"` after the last output, so an interrupted run is never
//! mistaken for a finished one. `run.toml` holds the fully resolved config;
//! `nora <command> --config <dir>/run.toml --out <new dir>` repeats the run.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::{sha256_hex, Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const CONFIG_FILE: &str = "run.toml";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Incomplete,
    Complete,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputRecord {
    pub role: String,
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputRecord {
    /// Relative to the run directory.
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub status: Status,
    pub seed: u64,
    pub config: String,
    pub config_sha256: String,
    pub inputs: Vec<InputRecord>,
    pub outputs: Vec<OutputRecord>,
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

pub struct RunWriter {
    dir: PathBuf,
    manifest: Manifest,
}

impl RunWriter {
    pub fn begin(dir: &Path, command: &str, cfg: &RunConfig) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut inputs = Vec::new();
        for (role, path) in cfg.input_files() {
            let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
            inputs.push(InputRecord {
                role: role.into(),
                path: path.to_path_buf(),
                sha256: sha256_hex(&bytes),
            });
        }
        let config = cfg.to_toml();
        let w = Self {
            dir: dir.to_path_buf(),
            manifest: Manifest {
                tool: "nora".into(),
                version: env!("CARGO_PKG_VERSION").into(),
                command: command.into(),
                status: Status::Incomplete,
                seed: cfg.seed,
                config: CONFIG_FILE.into(),
                config_sha256: sha256_hex(config.as_bytes()),
                inputs,
                outputs: Vec::new(),
            },
        };
        w.flush_manifest()?;
        let path = dir.join(CONFIG_FILE);
        fs::write(&path, config).map_err(|e| Error::io(&path, e))?;
        Ok(w)
    }

    fn flush_manifest(&self) -> Result<()> {
        let path = self.dir.join(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        text.push('\n');
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, bytes: impl AsRef<[u8]>) -> Result<()> {
        let bytes = bytes.as_ref();
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        self.manifest.outputs.push(OutputRecord {
            path: name.into(),
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    pub fn finish(mut self) -> Result<Manifest> {
        self.manifest.status = Status::Complete;
        self.flush_manifest()?;
        Ok(self.manifest)
    }
}
