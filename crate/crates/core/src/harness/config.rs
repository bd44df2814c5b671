use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::encoding::FeatureMode;
use crate::error::{Error, Result};
use crate::eventlog::LogFormat;

/// Experiment settings, read from a JSON file whose keys mirror the field
/// names. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Event log; relative paths are resolved against the config file.
    pub dataset: PathBuf,
    /// Guessed from the extension when absent.
    pub format: Option<LogFormat>,
    /// Dataset name for the results; the file stem when absent.
    pub name: Option<String>,
    /// `None`, `Raw`, `ClustN`, `BothN`, or bare `Clust` / `Both`, which
    /// expand over `max_clusters`.
    pub features: Vec<String>,
    pub max_clusters: Vec<usize>,
    pub folds: usize,
    pub train_fraction: f64,
    pub iterations: usize,
    pub total_epochs: usize,
    pub batch_size: usize,
    pub hidden_dim: usize,
    pub learning_rate: f64,
    pub max_case_len: usize,
    pub max_train_prefixes: usize,
    pub max_validation_prefixes: usize,
    pub validation_sample: usize,
    pub max_test_traces: usize,
    pub usage_threshold: f64,
    pub seed: u64,
    /// When false, timing columns are written as zero so that result files
    /// are byte-identical across runs.
    pub record_timings: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dataset: PathBuf::new(),
            format: None,
            name: None,
            features: vec!["None".into(), "Clust".into(), "Raw".into(), "Both".into()],
            max_clusters: vec![20, 40, 80],
            folds: 3,
            train_fraction: 0.75,
            iterations: 100,
            total_epochs: 10,
            batch_size: 256,
            hidden_dim: 256,
            learning_rate: 0.01,
            max_case_len: 100,
            max_train_prefixes: 75_000,
            max_validation_prefixes: 25_000,
            validation_sample: 10_000,
            max_test_traces: 100_000,
            usage_threshold: 0.04,
            seed: 0,
            record_timings: true,
        }
    }
}

impl ExperimentConfig {
    /// Parses and validates a JSON config.
    pub fn from_json(text: &str) -> Result<ExperimentConfig> {
        let config: ExperimentConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        let mut config = ExperimentConfig::from_json(&std::fs::read_to_string(path)?)?;
        if config.dataset.is_relative() {
            if let Some(dir) = path.parent() {
                config.dataset = dir.join(&config.dataset);
            }
        }
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("folds", self.folds),
            ("iterations", self.iterations),
            ("total_epochs", self.total_epochs),
            ("batch_size", self.batch_size),
            ("hidden_dim", self.hidden_dim),
            ("max_case_len", self.max_case_len),
            ("max_train_prefixes", self.max_train_prefixes),
            ("max_validation_prefixes", self.max_validation_prefixes),
            ("validation_sample", self.validation_sample),
            ("max_test_traces", self.max_test_traces),
        ];
        for (name, value) in positive {
            if value == 0 {
                return Err(Error::Config(format!("`{name}` must be positive")));
            }
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config("`train_fraction` must lie in (0, 1)".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("`learning_rate` must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.usage_threshold) {
            return Err(Error::Config("`usage_threshold` must lie in [0, 1)".into()));
        }
        if self.max_clusters.contains(&0) {
            return Err(Error::Config("`max_clusters` entries must be positive".into()));
        }
        if self.dataset.as_os_str().is_empty() {
            return Err(Error::Config("`dataset` is required".into()));
        }
        if self.modes()?.is_empty() {
            return Err(Error::Config("no feature modes configured".into()));
        }
        Ok(())
    }

    /// The feature modes to run, in configuration order without duplicates.
    pub fn modes(&self) -> Result<Vec<FeatureMode>> {
        let mut modes = Vec::new();
        for f in &self.features {
            let expanded = match f.to_ascii_lowercase().as_str() {
                "clust" => self.max_clusters.iter().map(|&n| FeatureMode::Clust(n)).collect(),
                "both" => self.max_clusters.iter().map(|&n| FeatureMode::Both(n)).collect(),
                _ => vec![f.parse::<FeatureMode>()?],
            };
            for m in expanded {
                if !modes.contains(&m) {
                    modes.push(m);
                }
            }
        }
        Ok(modes)
    }

    pub fn log_format(&self) -> Result<LogFormat> {
        self.format
            .or_else(|| LogFormat::from_path(&self.dataset))
            .ok_or_else(|| {
                Error::Config(format!(
                    "cannot tell the format of `{}`; set `format`",
                    self.dataset.display()
                ))
            })
    }

    pub fn dataset_name(&self) -> String {
        self.name.clone().unwrap_or_else(|| {
            self.dataset
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default()
        })
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(json)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}
