//! Every subcommand run ends with a manifest in the output directory:
//! the hash of the effective config, the seed, component versions, and the
//! files the run produced. A run that failed partway still writes one, with
//! `partial: true` and whatever outputs made it to disk, so stale artifacts
//! are never mistaken for a finished run.

use serde::Serialize;
use skipread::Result;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::config::RunConfig;

#[derive(Serialize)]
struct Manifest<'a> {
    subcommand: &'a str,
    config_sha256: &'a str,
    seed: u64,
    versions: BTreeMap<&'static str, String>,
    outputs: &'a [String],
    partial: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

pub struct RunContext {
    pub cfg: RunConfig,
    config_sha: String,
    out_dir: PathBuf,
    outputs: Vec<String>,
    partial: bool,
}

impl RunContext {
    pub fn new(cfg: RunConfig) -> Result<Self> {
        let config_sha = cfg.sha256()?;
        let out_dir = cfg.out_dir();
        std::fs::create_dir_all(&out_dir)?;
        Ok(Self { cfg, config_sha, out_dir, outputs: Vec::new(), partial: false })
    }

    /// Path of an artifact in the output directory.
    pub fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    /// Registers a file the run wrote.
    pub fn record(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    /// Marks the run as incomplete even though it will finish (e.g. some
    /// sweep points failed and were skipped).
    pub fn flag_partial(&mut self) {
        self.partial = true;
    }

    fn write(&self, subcommand: &str, partial: bool, error: Option<String>) -> Result<PathBuf> {
        let mut versions = BTreeMap::new();
        versions.insert("skipread-cli", env!("CARGO_PKG_VERSION").to_string());
        versions.insert(
            "checkpoint-format",
            skipread::checkpoint::FORMAT_VERSION.to_string(),
        );
        let manifest = Manifest {
            subcommand,
            config_sha256: &self.config_sha,
            seed: self.cfg.run.seed,
            versions,
            outputs: &self.outputs,
            partial,
            error,
        };
        let path = self.out_dir.join(format!("{subcommand}.manifest.json"));
        std::fs::write(&path, serde_json::to_string_pretty(&manifest)?)?;
        Ok(path)
    }

    /// Writes the manifest for a completed run.
    pub fn finish(self, subcommand: &str) -> Result<PathBuf> {
        self.write(subcommand, self.partial, None)
    }

    /// Writes a partial manifest for a run that failed after producing some
    /// outputs.
    pub fn abort(self, subcommand: &str, error: &skipread::Error) -> Result<PathBuf> {
        self.write(subcommand, true, Some(error.to_string()))
    }
}
