//! Run manifests: enough to re-run a command and check its outputs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use impute_forge_core::orchestrator::{ImputationLog, ImputationPlan};
use impute_forge_core::PromptStyle;
use serde::{Deserialize, Serialize};

use crate::config::{sha256_file, RunConfig};
use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub tag: String,
    pub style: PromptStyle,
    pub thresholds: BTreeMap<String, f64>,
    pub feature_space_reduction_pct: f64,
    pub imputed_cells: usize,
    pub prompt_tokens: usize,
    pub fallback_chunks: usize,
    pub imputed_path: Option<String>,
    pub plan: ImputationPlan,
    pub log: ImputationLog,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Command inputs beyond the config, such as evaluated files.
    pub inputs: Vec<PathBuf>,
    pub config: RunConfig,
    pub config_hash: String,
    pub complete: bool,
    pub runs: Vec<RunRecord>,
    /// Output path relative to the output directory → SHA-256.
    pub outputs: BTreeMap<String, String>,
    pub notes: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            inputs: Vec::new(),
            config: config.clone(),
            config_hash: config.hash(),
            complete: false,
            runs: Vec::new(),
            outputs: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    /// Records the hash of a file written below the output directory.
    pub fn record(&mut self, path: &Path) -> Result<(), CliError> {
        let rel = path
            .strip_prefix(&self.config.out)
            .unwrap_or(path)
            .to_string_lossy()
            .replace('\\', "/");
        self.outputs.insert(rel, sha256_file(path)?);
        Ok(())
    }

    pub fn path(out: &Path) -> PathBuf {
        out.join("manifest.json")
    }

    /// Copy kept per command so a later command does not hide it.
    pub fn archived_path(out: &Path, command: &str) -> PathBuf {
        out.join("manifests").join(format!("{command}.json"))
    }

    /// Writes `manifest.json` and the per-command copy.
    pub fn save(&self) -> Result<PathBuf, CliError> {
        let path = Self::path(&self.config.out);
        crate::analysis::write_json(&path, self)?;
        crate::analysis::write_json(&Self::archived_path(&self.config.out, &self.command), self)?;
        Ok(path)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// True when the stored hash matches the stored config.
    pub fn verify(&self) -> bool {
        self.config.hash() == self.config_hash
    }
}
