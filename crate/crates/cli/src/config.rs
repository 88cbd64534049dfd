//! TOML pipeline configuration. Every value can also be set by a command
//! flag, and flags win. Environment variables are never consulted.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Deserialize;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    /// Seed for every training/aggregation command.
    pub seed: Option<u64>,
    pub paths: PathsSection,
    pub extract: ExtractSection,
    pub em: EmSection,
    pub tagger: TaggerSection,
    pub quality: QualitySection,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsSection {
    pub dump: Option<PathBuf>,
    pub dialogues: Option<PathBuf>,
    pub annotations: Option<PathBuf>,
    pub corpus: Option<PathBuf>,
    pub models: Option<PathBuf>,
    pub reports: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractSection {
    pub min_turns: Option<usize>,
    pub min_first_level_score: Option<i64>,
    pub per_month_limit: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmSection {
    pub restarts: Option<usize>,
    pub iterations: Option<usize>,
    pub smoothing: Option<f64>,
    pub quality_mode: Option<String>,
    pub train_weight: Option<u64>,
    pub test_weight: Option<u64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaggerSection {
    pub lambda: Option<f64>,
    pub epochs: Option<usize>,
    pub step_size: Option<f64>,
    pub batch_size: Option<usize>,
    pub folds: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QualitySection {
    pub lambda: Option<f64>,
    pub folds: Option<usize>,
    pub min_frequency: Option<usize>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<FileConfig> {
        match path {
            None => Ok(FileConfig::default()),
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading config {}", path.display()))?;
                toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
            }
        }
    }
}

/// Flag wins over config; otherwise fall back to the default.
pub fn resolve<T: Clone>(flag: Option<T>, config: Option<T>, default: T) -> T {
    flag.or(config).unwrap_or(default)
}

/// A mandatory value with no default, e.g. the seed of a training command.
pub fn require<T>(flag: Option<T>, config: Option<T>, what: &str) -> Result<T> {
    flag.or(config)
        .with_context(|| format!("{what} is required: pass the flag or set it in the config file"))
}
