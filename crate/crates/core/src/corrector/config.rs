use serde::{Deserialize, Serialize};

use super::CorrectorError;
use crate::neuralcore::AdamConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub embed_dim: usize,
    pub enc_hidden: usize,
    pub tagger_hidden: usize,
    pub mid_hidden: usize,
    pub dec_hidden: usize,
    pub attention_dim: usize,
    pub char_embed_dim: usize,
    pub tag_embed_dim: usize,
    /// weight of the tagger term in the loss
    pub loss_mix: f64,
    pub max_decode_len: usize,
    pub tag_beam: usize,
    pub decode_beam: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self::toy()
    }
}

impl ModelConfig {
    /// 256-unit encoder, 64-unit tagger, 256-unit mid encoder and decoder.
    pub fn paper() -> Self {
        Self {
            embed_dim: 128,
            enc_hidden: 256,
            tagger_hidden: 64,
            mid_hidden: 256,
            dec_hidden: 256,
            attention_dim: 256,
            char_embed_dim: 64,
            tag_embed_dim: 8,
            loss_mix: 0.5,
            max_decode_len: 32,
            tag_beam: 1,
            decode_beam: 1,
        }
    }

    /// Encoder 32, tagger 16, decoder 32.
    pub fn toy() -> Self {
        Self {
            embed_dim: 32,
            enc_hidden: 32,
            tagger_hidden: 16,
            mid_hidden: 32,
            dec_hidden: 32,
            attention_dim: 32,
            char_embed_dim: 16,
            tag_embed_dim: 4,
            loss_mix: 0.5,
            max_decode_len: 32,
            tag_beam: 1,
            decode_beam: 1,
        }
    }

    pub fn validate(&self) -> Result<(), CorrectorError> {
        let dims = [
            ("embed_dim", self.embed_dim),
            ("enc_hidden", self.enc_hidden),
            ("tagger_hidden", self.tagger_hidden),
            ("mid_hidden", self.mid_hidden),
            ("dec_hidden", self.dec_hidden),
            ("attention_dim", self.attention_dim),
            ("char_embed_dim", self.char_embed_dim),
            ("tag_embed_dim", self.tag_embed_dim),
            ("tag_beam", self.tag_beam),
            ("decode_beam", self.decode_beam),
        ];
        if let Some((name, _)) = dims.iter().find(|(_, v)| *v == 0) {
            return Err(CorrectorError::InvalidConfig(format!(
                "{name} must be at least 1"
            )));
        }
        if !(self.loss_mix > 0.0 && self.loss_mix < 1.0) {
            return Err(CorrectorError::InvalidConfig(format!(
                "loss_mix {} is outside (0, 1)",
                self.loss_mix
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub seed: u64,
    /// stop once an epoch's mean loss falls below this
    pub target_loss: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            batch_size: 16,
            adam: AdamConfig {
                lr: 1e-3,
                clip_norm: Some(5.0),
                ..AdamConfig::default()
            },
            seed: 0,
            target_loss: None,
        }
    }
}
