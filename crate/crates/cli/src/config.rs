use std::path::{Path, PathBuf};

use anyhow::Context;
use numdenorm::corrector::{ModelConfig, TrainConfig};
use numdenorm::datasynth::{Holdout, SplitSpec};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::Failure;

pub const TOOL: &str = "numdenorm";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Settings shared by all stages. Loaded from `--config`, then overridden by
/// command-line flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub rules: Option<PathBuf>,
    pub templates: Option<PathBuf>,
    pub per_template: usize,
    pub tail_mode: bool,
    pub split: SplitSpec,
    /// values kept out of training and used for testing
    pub holdout: Holdout,
    pub error_model: Option<PathBuf>,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub min_word_count: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            rules: None,
            templates: None,
            per_template: 100,
            tail_mode: false,
            split: SplitSpec::default(),
            holdout: Holdout {
                fraction: 0.2,
                salt: 7,
            },
            error_model: None,
            model: ModelConfig::toy(),
            train: TrainConfig::default(),
            min_word_count: 1,
        }
    }
}

impl PipelineConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, Failure> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        require_file(path)?;
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))
            .map_err(Failure::Data)?;
        serde_json::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))
            .map_err(Failure::Data)
    }
}

/// Provenance written next to every artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub config_hash: String,
}

impl Meta {
    /// `settings` is the resolved configuration of the command, including
    /// its input paths; its canonical JSON is what gets hashed.
    pub fn new<T: Serialize>(command: &str, seed: u64, settings: &T) -> Self {
        let bytes = serde_json::to_vec(settings).expect("settings serialize");
        Self {
            tool: TOOL.to_string(),
            version: VERSION.to_string(),
            command: command.to_string(),
            seed,
            config_hash: sha256_hex(&bytes),
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Sidecar path for a file artifact: `x.jsonl` -> `x.jsonl.meta.json`.
pub fn meta_path(artifact: &Path) -> PathBuf {
    let mut name = artifact.file_name().unwrap_or_default().to_os_string();
    name.push(".meta.json");
    artifact.with_file_name(name)
}

pub fn write_meta(path: &Path, meta: &Meta) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(meta).expect("meta serializes") + "\n";
    std::fs::write(path, text)
        .with_context(|| format!("writing {}", path.display()))
        .map_err(Failure::Data)
}

pub fn require_file(path: &Path) -> Result<(), Failure> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Failure::Data(anyhow::anyhow!(
            "no such file: {}",
            path.display()
        )))
    }
}

pub fn require_dir(path: &Path) -> Result<(), Failure> {
    if path.is_dir() {
        Ok(())
    } else {
        Err(Failure::Data(anyhow::anyhow!(
            "no such directory: {}",
            path.display()
        )))
    }
}
