use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::{LossBreakdown, TrainingExample};
use super::{ModelConfig, ModelError, ModelState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub steps: usize,
    pub lr: f64,
    pub batch_size: usize,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            steps: 1000,
            lr: 0.1,
            batch_size: 16,
        }
    }
}

/// One line of the training log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainLogEntry {
    pub step: usize,
    #[serde(flatten)]
    pub loss: LossBreakdown,
}

/// Trains a freshly initialized model. See [`train_from`].
pub fn train(
    config: ModelConfig,
    examples: &[TrainingExample],
    opts: TrainOptions,
    log: Option<&mut dyn Write>,
) -> Result<ModelState, ModelError> {
    train_from(ModelState::init(config)?, examples, opts, log)
}

/// Plain minibatch gradient descent with a fixed learning rate. Batches are
/// drawn from seeded per-epoch shuffles; the logged losses are those of the
/// batch before its update.
pub fn train_from(
    mut state: ModelState,
    examples: &[TrainingExample],
    opts: TrainOptions,
    mut log: Option<&mut dyn Write>,
) -> Result<ModelState, ModelError> {
    if opts.steps == 0 || opts.batch_size == 0 {
        return Err(ModelError::BadExample(
            "steps and batch_size must be at least 1".into(),
        ));
    }
    if examples.is_empty() {
        return Err(ModelError::BadExample("no training examples".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(state.config.seed ^ 0x7472_6169_6e00);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut cursor = order.len();
    let mut batch = Vec::with_capacity(opts.batch_size);
    for step in 1..=opts.steps {
        batch.clear();
        while batch.len() < opts.batch_size.min(examples.len()) {
            if cursor == order.len() {
                order.shuffle(&mut rng);
                cursor = 0;
            }
            batch.push(examples[order[cursor]].clone());
            cursor += 1;
        }
        let (loss, grads) = match state.grad(&batch) {
            Err(ModelError::NonFiniteLoss { .. }) => {
                return Err(ModelError::NonFiniteLoss { step: Some(step) })
            }
            r => r?,
        };
        if let Some(w) = log.as_deref_mut() {
            serde_json::to_writer(&mut *w, &TrainLogEntry { step, loss })
                .map_err(std::io::Error::from)?;
            w.write_all(b"\n")?;
        }
        if opts.lr != 0.0 {
            state.params.scaled_add(-opts.lr, &grads);
            if !state.params.all_finite() {
                return Err(ModelError::NonFiniteLoss { step: Some(step) });
            }
        }
    }
    Ok(state)
}
