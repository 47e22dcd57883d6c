use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{CorrectionModel, CorrectorError, TrainConfig};
use crate::neuralcore::Adam;
use crate::spanalign::AlignedExample;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// mean example loss per epoch
    pub epoch_losses: Vec<f64>,
    pub steps: u64,
}

impl CorrectionModel {
    pub fn train(
        &mut self,
        corpus: &[AlignedExample],
        cfg: &TrainConfig,
    ) -> Result<TrainReport, CorrectorError> {
        self.train_with(corpus, cfg, |_, _| {})
    }

    /// Mini-batch Adam; `on_epoch(epoch, mean_loss)` runs after each epoch.
    pub fn train_with<F>(
        &mut self,
        corpus: &[AlignedExample],
        cfg: &TrainConfig,
        mut on_epoch: F,
    ) -> Result<TrainReport, CorrectorError>
    where
        F: FnMut(usize, f64),
    {
        if corpus.is_empty() {
            return Err(CorrectorError::EmptyCorpus);
        }
        for ex in corpus {
            if ex.input_tokens.is_empty() {
                return Err(CorrectorError::EmptyInput);
            }
            ex.validate()?;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut opt = Adam::new(cfg.adam, &self.store);
        let mut order: Vec<usize> = (0..corpus.len()).collect();
        let mut report = TrainReport {
            epoch_losses: Vec::new(),
            steps: 0,
        };
        for epoch in 0..cfg.epochs {
            order.shuffle(&mut rng);
            let mut total = 0.0;
            for batch in order.chunks(cfg.batch_size.max(1)) {
                for &i in batch {
                    let (loss, grads) = self.loss_and_grads(&corpus[i])?;
                    total += loss;
                    self.store.accumulate(&grads);
                }
                self.store.scale_grads(1.0 / batch.len() as f64);
                opt.step(&mut self.store)?;
            }
            let mean = total / corpus.len() as f64;
            report.epoch_losses.push(mean);
            on_epoch(epoch, mean);
            if cfg.target_loss.is_some_and(|t| mean < t) {
                break;
            }
        }
        report.steps = opt.steps();
        Ok(report)
    }
}
