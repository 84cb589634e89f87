//! Run configuration: a JSON file, optionally overridden by flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use impute_forge_core::eval::ForestMode;
use impute_forge_core::prompt::{PromptConfig, DEFAULT_INSTRUCTION, DEFAULT_MISSING_DISPLAY};
use impute_forge_core::{BackendConfig, ClassPartition, PromptStyle, SelectionMode};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    Elbow,
    Fixed,
    GlobalMin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PolicyConfig {
    pub kind: PolicyKind,
    /// Used by `fixed`; one run per threshold.
    pub thresholds: Vec<f64>,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            kind: PolicyKind::Elbow,
            thresholds: Vec::new(),
        }
    }
}

impl PolicyConfig {
    /// (tag, mode) for each run the policy asks for.
    pub fn runs(&self) -> Vec<(String, SelectionMode)> {
        match self.kind {
            PolicyKind::Elbow => vec![("elbow".into(), SelectionMode::PerFeature)],
            PolicyKind::GlobalMin => vec![("global-min".into(), SelectionMode::GlobalMin)],
            PolicyKind::Fixed => self
                .thresholds
                .iter()
                .map(|&t| (threshold_tag(t), SelectionMode::Fixed(t)))
                .collect(),
        }
    }
}

pub fn threshold_tag(t: f64) -> String {
    format!("t{t}")
}

/// Which columns get imputed: "auto" (every column with missing cells) or
/// an explicit list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FeatureSelection {
    Auto(AutoTag),
    List(Vec<String>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoTag {
    Auto,
}

impl Default for FeatureSelection {
    fn default() -> Self {
        FeatureSelection::Auto(AutoTag::Auto)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PromptSettings {
    pub num_example_sets: usize,
    pub examples_per_group: usize,
    pub missing_display: String,
    pub style: PromptStyle,
    pub instruction_template: String,
    /// Target values in group order (A., B.); default minority first.
    pub class_order: Option<Vec<String>>,
    /// How target values are shown in prompts.
    pub class_display: BTreeMap<String, String>,
    /// Column names shown in prompts, when they differ from the CSV header.
    pub column_labels: BTreeMap<String, String>,
}

impl Default for PromptSettings {
    fn default() -> Self {
        Self {
            num_example_sets: 2,
            examples_per_group: 10,
            missing_display: DEFAULT_MISSING_DISPLAY.into(),
            style: PromptStyle::Grouped,
            instruction_template: DEFAULT_INSTRUCTION.into(),
            class_order: None,
            class_display: BTreeMap::new(),
            column_labels: BTreeMap::new(),
        }
    }
}

impl PromptSettings {
    pub fn resolve(&self, partition: &ClassPartition) -> PromptConfig {
        let order: Vec<&str> = match &self.class_order {
            Some(o) => o.iter().map(String::as_str).collect(),
            None => vec![partition.minority(), partition.majority()],
        };
        let mut cfg = PromptConfig::new(&order, &self.class_display);
        cfg.num_example_sets = self.num_example_sets;
        cfg.examples_per_group = self.examples_per_group;
        cfg.missing_display = self.missing_display.clone();
        cfg.style = self.style;
        cfg.instruction_template = self.instruction_template.clone();
        cfg.column_labels = self.column_labels.clone();
        cfg
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalSettings {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub models: Vec<ForestMode>,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: None,
            min_samples_leaf: 1,
            models: vec![ForestMode::RandomForest, ForestMode::GradientStub],
        }
    }
}

/// Extra missing cells to punch into a column before imputing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InjectConfig {
    pub feature: String,
    pub per_class: BTreeMap<String, usize>,
    pub seed: u64,
    /// Read `per_class` as the wanted total of missing cells per class
    /// rather than as a number of cells to add.
    #[serde(default)]
    pub top_up: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub dataset: PathBuf,
    pub schema: PathBuf,
    pub sentinels: Vec<String>,
    pub inject: Vec<InjectConfig>,
    /// Keep only this many incomplete rows per class (after injection);
    /// complete rows are always kept.
    pub incomplete_per_class: Option<BTreeMap<String, usize>>,
    pub features: FeatureSelection,
    pub policy: PolicyConfig,
    pub prompt: PromptSettings,
    pub backend: BackendConfig,
    pub evaluation: EvalSettings,
    pub seed: u64,
    pub out: PathBuf,
    /// Directory for rendered prompts; none means prompts are not written.
    pub dump_prompts: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset: PathBuf::new(),
            schema: PathBuf::new(),
            sentinels: vec!["?".into()],
            inject: Vec::new(),
            incomplete_per_class: None,
            features: FeatureSelection::default(),
            policy: PolicyConfig::default(),
            prompt: PromptSettings::default(),
            backend: BackendConfig::default(),
            evaluation: EvalSettings::default(),
            seed: 42,
            out: PathBuf::from("out"),
            dump_prompts: None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("config {path}: {message}")]
    Read { path: String, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

impl RunConfig {
    /// Loads a config file. Relative dataset, schema and output paths are
    /// taken relative to the file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let mut cfg: RunConfig = serde_json::from_str(&text).map_err(|e| ConfigError::Read {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.dataset, &mut cfg.schema, &mut cfg.out] {
            if p.is_relative() && !p.as_os_str().is_empty() {
                *p = base.join(&*p);
            }
        }
        if let Some(p) = cfg.dump_prompts.as_mut() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.dataset.as_os_str().is_empty() {
            return Err(ConfigError::Invalid("dataset path is required".into()));
        }
        if self.schema.as_os_str().is_empty() {
            return Err(ConfigError::Invalid("schema path is required".into()));
        }
        if self.policy.kind == PolicyKind::Fixed && self.policy.thresholds.is_empty() {
            return Err(ConfigError::Invalid("fixed policy needs at least one threshold".into()));
        }
        if let Some(t) = self.policy.thresholds.iter().find(|t| !(0.0..=1.0).contains(*t)) {
            return Err(ConfigError::Invalid(format!("threshold {t} is outside [0, 1]")));
        }
        if self.prompt.examples_per_group == 0 {
            return Err(ConfigError::Invalid("examples_per_group must be at least 1".into()));
        }
        if self.evaluation.n_trees == 0 {
            return Err(ConfigError::Invalid("evaluation.n_trees must be at least 1".into()));
        }
        self.backend
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }
}

pub fn sha256_file(path: &Path) -> std::io::Result<String> {
    Ok(hex::encode(Sha256::digest(std::fs::read(path)?)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg: RunConfig = serde_json::from_str(r#"{"dataset":"a.csv","schema":"s.json"}"#).unwrap();
        assert_eq!(cfg.features, FeatureSelection::Auto(AutoTag::Auto));
        assert_eq!(cfg.prompt.examples_per_group, 10);
        assert_eq!(cfg.backend.temperature, 0.0);
        cfg.validate().unwrap();
    }

    #[test]
    fn feature_list_and_fixed_policy() {
        let cfg: RunConfig = serde_json::from_str(
            r#"{"dataset":"a","schema":"b","features":["workclass"],
                "policy":{"kind":"fixed","thresholds":[0,0.1,0.2]}}"#,
        )
        .unwrap();
        assert_eq!(cfg.features, FeatureSelection::List(vec!["workclass".into()]));
        let tags: Vec<String> = cfg.policy.runs().into_iter().map(|r| r.0).collect();
        assert_eq!(tags, ["t0", "t0.1", "t0.2"]);
    }

    #[test]
    fn empty_fixed_policy_is_invalid() {
        let cfg: RunConfig =
            serde_json::from_str(r#"{"dataset":"a","schema":"b","policy":{"kind":"fixed"}}"#).unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig {
            dataset: "x".into(),
            schema: "y".into(),
            ..Default::default()
        };
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.seed += 1;
        assert_ne!(a.hash(), b.hash());
        let back: RunConfig = serde_json::from_str(&a.canonical_json()).unwrap();
        assert_eq!(back.hash(), a.hash());
    }
}
