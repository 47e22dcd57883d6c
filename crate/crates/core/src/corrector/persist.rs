use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CorrectionModel, CorrectorError, ModelConfig, Vocabulary};
use crate::neuralcore::{load_checkpoint, save_checkpoint};

pub const MODEL_FORMAT_VERSION: u32 = 1;
pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const SIDECAR_FILE: &str = "model.json";

#[derive(Serialize, Deserialize)]
struct Sidecar {
    format_version: u32,
    config: ModelConfig,
    vocabulary: Vocabulary,
}

impl CorrectionModel {
    /// Write `model.ckpt` and `model.json` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<(), CorrectorError> {
        std::fs::create_dir_all(dir)?;
        save_checkpoint(&self.store, &dir.join(CHECKPOINT_FILE))?;
        let side = Sidecar {
            format_version: MODEL_FORMAT_VERSION,
            config: self.config.clone(),
            vocabulary: self.vocab.clone(),
        };
        std::fs::write(
            dir.join(SIDECAR_FILE),
            serde_json::to_string_pretty(&side)? + "\n",
        )?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, CorrectorError> {
        let side: Sidecar =
            serde_json::from_str(&std::fs::read_to_string(dir.join(SIDECAR_FILE))?)?;
        if side.format_version != MODEL_FORMAT_VERSION {
            return Err(CorrectorError::FormatVersion {
                found: side.format_version,
                expected: MODEL_FORMAT_VERSION,
            });
        }
        let mut model = CorrectionModel::new(side.config, side.vocabulary, 0)?;
        let loaded = load_checkpoint(&dir.join(CHECKPOINT_FILE))?;
        model.store.load_values(&loaded)?;
        Ok(model)
    }
}
