//! Numeric spoken/written normalization toolkit.
//!
//! * [`numgrammar`]: weighted verbalization grammar and rule denormer
//! * [`datasynth`]: template-driven parallel corpus generation
//! * [`asrsim`]: simulated recognizer errors on written transcripts
//! * [`spanalign`]: trivial/non-trivial tagging by token alignment
//! * [`neuralcore`]: small reverse-mode autodiff engine with GRU and attention
//! * [`corrector`]: tagger plus span-restricted attentional correction model
//! * [`evalkit`]: WER scoring and report tables

pub mod asrsim;
pub mod corrector;
pub mod datasynth;
pub mod evalkit;
pub mod neuralcore;
pub mod numgrammar;
pub mod spanalign;
