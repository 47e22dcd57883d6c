//! Tagger plus span-restricted attentional decoder.
//!
//! A bidirectional GRU encodes the input words. A GRU tagger labels each word
//! with a joint trivial/non-trivial × start/continuation tag, feeding back the
//! previous tag. Each non-trivial span is re-encoded on its own and decoded
//! character by character with additive attention over the span states and a
//! projection of the surrounding encoder context. Trivial words are copied.

mod config;
mod model;
mod persist;
mod train;
mod vocab;

use thiserror::Error;

pub use config::{ModelConfig, TrainConfig};
pub use model::{CorrectionModel, DecodeResult, LossParts};
pub use persist::{CHECKPOINT_FILE, MODEL_FORMAT_VERSION, SIDECAR_FILE};
pub use train::TrainReport;
pub use vocab::{Vocabulary, BOS, CHAR_UNK, EOS, PAD, UNK, UNK_CHAR};

use crate::neuralcore::{CheckpointError, NnError};
use crate::spanalign::AlignError;

#[derive(Debug, Error)]
pub enum CorrectorError {
    #[error("input is empty")]
    EmptyInput,
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("span [{s}, {e}) is outside 0..={len}")]
    BadSpan { s: usize, e: usize, len: usize },
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("model format version {found}, expected {expected}")]
    FormatVersion { found: u32, expected: u32 },
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Align(#[from] AlignError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[cfg(test)]
mod tests;
