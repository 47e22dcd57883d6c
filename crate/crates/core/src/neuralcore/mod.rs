//! Small reverse-mode autodiff engine over `f64` vectors, with the GRU,
//! attention and optimizer pieces the correction model needs.

mod checkpoint;
pub mod gradcheck;
mod graph;
mod layers;
mod optim;
mod tensor;

use thiserror::Error;

pub use checkpoint::{
    from_bytes, load_checkpoint, save_checkpoint, to_bytes, CheckpointError, FORMAT_VERSION,
};
pub use graph::{log_softmax, softmax, Gradients, Graph, NodeId};
pub use layers::{
    additive_attention, birnn_encode, birnn_states, cross_entropy, gru_step, rnn_encode,
    AdditiveAttention, Embedding, GruCell, Linear,
};
pub use optim::{Adam, AdamConfig};
pub use tensor::{DType, ParamId, ParameterStore, Tensor};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnError {
    #[error("shape mismatch in {what}: expected {expected}, got {got}")]
    ShapeMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("empty sequence")]
    EmptySequence,
    #[error("index {index} out of range for {len} entries")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("non-finite value in loss")]
    NonFinite,
    #[error("optimizer step without gradients")]
    MissingGradients,
    #[error("duplicate parameter `{0}`")]
    DuplicateParameter(String),
    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),
}

#[cfg(test)]
mod tests;
