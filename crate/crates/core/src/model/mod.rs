//! Toy masked language model trained with the MLM, clue-contrastive and
//! clue-classification objectives.
//!
//! All math is `f64`. Training is single-threaded and deterministic under
//! `ModelConfig::seed`.

mod checkpoint;
mod gradcheck;
mod loss;
mod network;
mod params;
mod train;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::masking::{MaskedSample, Vocabulary, MASK_ID};

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use gradcheck::{finite_diff_check, GradCheck, CHECK_COORDS, REL_ERROR_FLOOR};
pub use loss::{LossBreakdown, LossWeights, TrainingExample};
pub use params::{Params, GROUP_NAMES, INIT_SCALE, N_GROUPS};
pub use train::{train, train_from, TrainLogEntry, TrainOptions};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("sequence of length {len} exceeds max_len {max}")]
    SequenceTooLong { len: usize, max: usize },
    #[error("token id {id} outside vocabulary of size {vocab}")]
    TokenOutOfRange { id: u32, vocab: usize },
    #[error("position {pos} outside sequence of length {len}")]
    PositionOutOfRange { pos: usize, len: usize },
    #[error("empty mask set")]
    EmptyMaskSet,
    #[error("input has no mask token")]
    NoMask,
    #[error("bad training example: {0}")]
    BadExample(String),
    #[error("non-finite loss{}", step.map(|s| format!(" at step {s}")).unwrap_or_default())]
    NonFiniteLoss { step: Option<usize> },
    #[error("finite-difference eps must be in (0, 1e-3], got {0}")]
    BadEpsilon(f64),
    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub d: usize,
    pub d_ff: usize,
    pub max_len: usize,
    pub seed: u64,
    pub lambda_con: f64,
    pub lambda_cls: f64,
}

impl ModelConfig {
    /// `d_ff = 4d`, both auxiliary weights 1.
    pub fn new(vocab_size: usize, d: usize, max_len: usize, seed: u64) -> Self {
        Self {
            vocab_size,
            d,
            d_ff: 4 * d,
            max_len,
            seed,
            lambda_con: 1.0,
            lambda_cls: 1.0,
        }
    }

    pub fn with_lambdas(mut self, lambda_con: f64, lambda_cls: f64) -> Self {
        self.lambda_con = lambda_con;
        self.lambda_cls = lambda_cls;
        self
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::InvalidConfig(m.to_string()));
        if self.d < 2 {
            return bad("d must be at least 2");
        }
        if self.vocab_size < 4 {
            return bad("vocab_size must be at least 4");
        }
        if self.d_ff == 0 || self.max_len == 0 {
            return bad("d_ff and max_len must be positive");
        }
        let ok = |x: f64| x.is_finite() && x >= 0.0;
        if !ok(self.lambda_con) || !ok(self.lambda_cls) {
            return bad("loss weights must be finite and nonnegative");
        }
        Ok(())
    }

    pub fn weights(&self) -> LossWeights {
        LossWeights::total(self.lambda_con, self.lambda_cls)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    pub config: ModelConfig,
    pub params: Params,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput {
    /// `n × d` contextual embeddings.
    pub embeddings: Array2<f64>,
    /// `n × V`, each row a distribution.
    pub probs: Array2<f64>,
}

impl ModelState {
    pub fn init(config: ModelConfig) -> Result<Self, ModelError> {
        config.validate()?;
        let params = Params::init(&config);
        Ok(Self { config, params })
    }

    /// All weights zero: every output distribution is uniform.
    pub fn zeros(config: ModelConfig) -> Result<Self, ModelError> {
        config.validate()?;
        let params = Params::zeros(&config);
        Ok(Self { config, params })
    }

    pub(crate) fn check_ids(&self, ids: &[u32]) -> Result<(), ModelError> {
        if ids.len() > self.config.max_len {
            return Err(ModelError::SequenceTooLong {
                len: ids.len(),
                max: self.config.max_len,
            });
        }
        if let Some(&id) = ids.iter().find(|&&t| t as usize >= self.config.vocab_size) {
            return Err(ModelError::TokenOutOfRange {
                id,
                vocab: self.config.vocab_size,
            });
        }
        Ok(())
    }

    pub(crate) fn check_input(&self, m: &MaskedSample) -> Result<(), ModelError> {
        self.check_ids(&m.input_ids)?;
        self.check_ids(&m.targets)?;
        if m.mask_positions.len() != m.targets.len() {
            return Err(ModelError::BadExample(format!(
                "{}: {} mask positions but {} targets",
                m.doc_id,
                m.mask_positions.len(),
                m.targets.len()
            )));
        }
        if let Some(&pos) = m.mask_positions.iter().find(|&&p| p >= m.input_ids.len()) {
            return Err(ModelError::PositionOutOfRange {
                pos,
                len: m.input_ids.len(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, ids: &[u32]) -> Result<ForwardOutput, ModelError> {
        self.check_ids(ids)?;
        let cache = network::encode(&self.params, ids);
        let mut probs = Array2::zeros((ids.len(), self.config.vocab_size));
        for (i, mut row) in probs.rows_mut().into_iter().enumerate() {
            row.assign(&network::lm_probs(&self.params, cache.y.row(i)));
        }
        Ok(ForwardOutput {
            embeddings: cache.y,
            probs,
        })
    }

    /// Three-way classifier distribution for one contextual embedding.
    pub fn classifier_probs(&self, output: &ForwardOutput, pos: usize) -> [f64; 3] {
        network::cls_probs(&self.params, output.embeddings.row(pos))
    }

    /// Predicted variant class (0 keep-clues, 1 mask-clues, 2 mask-random)
    /// from the summed log-probabilities over `positions`.
    pub fn classify(&self, ids: &[u32], positions: &[usize]) -> Result<usize, ModelError> {
        if positions.is_empty() {
            return Err(ModelError::EmptyMaskSet);
        }
        let out = self.forward(ids)?;
        let mut score = [0.0; 3];
        for &pos in positions {
            check_pos(pos, ids.len())?;
            let p = self.classifier_probs(&out, pos);
            for (s, p) in score.iter_mut().zip(p) {
                *s += p.max(f64::MIN_POSITIVE).ln();
            }
        }
        Ok(argmax(&score))
    }

    pub fn losses(&self, batch: &[TrainingExample]) -> Result<LossBreakdown, ModelError> {
        loss::evaluate(self, batch, self.config.weights(), false).map(|(l, _)| l)
    }

    pub fn losses_weighted(
        &self,
        batch: &[TrainingExample],
        weights: LossWeights,
    ) -> Result<LossBreakdown, ModelError> {
        loss::evaluate(self, batch, weights, false).map(|(l, _)| l)
    }

    /// Gradient of `L_total` under the config's weights.
    pub fn grad(&self, batch: &[TrainingExample]) -> Result<(LossBreakdown, Params), ModelError> {
        self.grad_weighted(batch, self.config.weights())
    }

    pub fn grad_weighted(
        &self,
        batch: &[TrainingExample],
        weights: LossWeights,
    ) -> Result<(LossBreakdown, Params), ModelError> {
        let (l, g) = loss::evaluate(self, batch, weights, true)?;
        Ok((l, g.expect("gradient requested")))
    }

    /// Independent argmax at every mask position, excluding special tokens.
    /// Ties resolve to the lowest id.
    pub fn predict_fill(&self, ids: &[u32]) -> Result<Vec<u32>, ModelError> {
        let positions: Vec<usize> = (0..ids.len()).filter(|&i| ids[i] == MASK_ID).collect();
        if positions.is_empty() {
            return Err(ModelError::NoMask);
        }
        let out = self.forward(ids)?;
        Ok(positions
            .into_iter()
            .map(|p| {
                let row = out.probs.row(p);
                let mut best = Vocabulary::FIRST_CONTENT_ID;
                for t in Vocabulary::FIRST_CONTENT_ID..row.len() as u32 {
                    if row[t as usize] > row[best as usize] {
                        best = t;
                    }
                }
                best
            })
            .collect())
    }
}

fn check_pos(pos: usize, len: usize) -> Result<(), ModelError> {
    if pos >= len {
        return Err(ModelError::PositionOutOfRange { pos, len });
    }
    Ok(())
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Mean probability assigned to `targets` at `positions`.
pub fn avg_truth_prob(
    output: &ForwardOutput,
    positions: &[usize],
    targets: &[u32],
) -> Result<f64, ModelError> {
    if positions.is_empty() {
        return Err(ModelError::EmptyMaskSet);
    }
    if positions.len() != targets.len() {
        return Err(ModelError::BadExample(format!(
            "{} positions but {} targets",
            positions.len(),
            targets.len()
        )));
    }
    let (n, v) = output.probs.dim();
    let mut sum = 0.0;
    for (&p, &t) in positions.iter().zip(targets) {
        check_pos(p, n)?;
        if t as usize >= v {
            return Err(ModelError::TokenOutOfRange { id: t, vocab: v });
        }
        sum += output.probs[[p, t as usize]];
    }
    Ok(sum / positions.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::masking::{MaskScheme, Variant, PAD_ID};

    fn cfg() -> ModelConfig {
        ModelConfig::new(12, 4, 8, 3)
    }

    fn masked(ids: Vec<u32>, positions: Vec<usize>, variant: Variant) -> MaskedSample {
        let mut input_ids = ids;
        let targets = positions
            .iter()
            .map(|&p| std::mem::replace(&mut input_ids[p], MASK_ID))
            .collect();
        MaskedSample {
            doc_id: "d".into(),
            scheme: MaskScheme::Deterministic,
            variant,
            input_ids,
            mask_positions: positions,
            targets,
        }
    }

    #[test]
    fn config_invariants() {
        assert!(ModelConfig::new(4, 2, 1, 0).validate().is_ok());
        assert!(ModelConfig::new(3, 2, 1, 0).validate().is_err());
        assert!(ModelConfig::new(4, 1, 1, 0).validate().is_err());
        assert!(ModelConfig::new(4, 2, 1, 0)
            .with_lambdas(-1.0, 0.0)
            .validate()
            .is_err());
    }

    #[test]
    fn init_is_seeded() {
        let a = ModelState::init(cfg()).unwrap();
        let b = ModelState::init(cfg()).unwrap();
        assert_eq!(a, b);
        let mut other = cfg();
        other.seed = 4;
        assert_ne!(a, ModelState::init(other).unwrap());
        let tiny = ModelState::init(ModelConfig::new(4, 2, 1, 0)).unwrap();
        assert_eq!(tiny.params.cls_w.dim(), (2, 3));
    }

    #[test]
    fn forward_rows_normalized() {
        let s = ModelState::init(cfg()).unwrap();
        let out = s.forward(&[3, 4, MASK_ID, 5, PAD_ID]).unwrap();
        assert_eq!(out.embeddings.dim(), (5, 4));
        for row in out.probs.rows() {
            assert!((row.sum() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn forward_too_long() {
        let s = ModelState::init(cfg()).unwrap();
        assert!(matches!(
            s.forward(&[3; 9]),
            Err(ModelError::SequenceTooLong { len: 9, max: 8 })
        ));
    }

    #[test]
    fn pad_swap_leaves_real_tokens() {
        let s = ModelState::init(cfg()).unwrap();
        // pad positions differ only by position embedding; keys are masked
        let a = s.forward(&[3, 4, PAD_ID, 5, PAD_ID]).unwrap();
        let mut ids = [3, 4, PAD_ID, 5, PAD_ID];
        ids.swap(2, 4);
        let b = s.forward(&ids).unwrap();
        for i in [0, 1, 3] {
            for (x, y) in a.probs.row(i).iter().zip(b.probs.row(i)) {
                assert_eq!(x, y);
            }
        }
    }

    #[test]
    fn zero_state_is_uniform() {
        let s = ModelState::zeros(cfg()).unwrap();
        let out = s.forward(&[3, MASK_ID, 7]).unwrap();
        for p in out.probs.iter() {
            assert!((p - 1.0 / 12.0).abs() < 1e-15);
        }
        assert!((avg_truth_prob(&out, &[1], &[7]).unwrap() - 1.0 / 12.0).abs() < 1e-15);
    }

    #[test]
    fn avg_truth_prob_is_mean() {
        let mut probs = Array2::zeros((2, 4));
        probs[[0, 3]] = 0.2;
        probs[[1, 1]] = 0.6;
        let out = ForwardOutput {
            embeddings: Array2::zeros((2, 2)),
            probs,
        };
        assert!((avg_truth_prob(&out, &[0, 1], &[3, 1]).unwrap() - 0.4).abs() < 1e-15);
        assert!(matches!(
            avg_truth_prob(&out, &[], &[]),
            Err(ModelError::EmptyMaskSet)
        ));
    }

    #[test]
    fn uniform_losses() {
        let s = ModelState::zeros(cfg()).unwrap();
        let keep = masked(vec![3, 4, 5, 6, 7], vec![4], Variant::KeepClues);
        let drop = masked(vec![3, 4, 5, 6, 7], vec![0, 1, 4], Variant::MaskClues);
        let randv = masked(vec![3, 4, 5, 6, 7], vec![2, 3, 4], Variant::MaskRandom);
        let l = s
            .losses(&[TrainingExample::triple(keep, drop, randv)])
            .unwrap();
        assert!((l.cls - 3f64.ln()).abs() < 1e-12);
        assert!((l.mlm - 12f64.ln()).abs() < 1e-12);
        assert!(l.con.abs() < 1e-15);
    }

    #[test]
    fn identical_keep_and_drop_cancel() {
        let s = ModelState::init(cfg()).unwrap();
        let keep = masked(vec![3, 4, 5, 6], vec![3], Variant::KeepClues);
        let l = s
            .losses(&[TrainingExample::triple(keep.clone(), keep.clone(), keep)])
            .unwrap();
        assert_eq!(l.con, 0.0);
    }

    #[test]
    fn predict_fill_tie_break_and_order() {
        let s = ModelState::zeros(cfg()).unwrap();
        let preds = s.predict_fill(&[5, MASK_ID, 6, MASK_ID]).unwrap();
        assert_eq!(preds, vec![Vocabulary::FIRST_CONTENT_ID; 2]);
        assert!(matches!(s.predict_fill(&[5, 6]), Err(ModelError::NoMask)));
    }

    #[test]
    fn group_examples() {
        let k = masked(vec![3, 4, 5], vec![2], Variant::KeepClues);
        let d = masked(vec![3, 4, 5], vec![0, 2], Variant::MaskClues);
        let r = masked(vec![3, 4, 5], vec![1, 2], Variant::MaskRandom);
        let p = masked(vec![3, 4, 5], vec![1], Variant::Plain);
        let g = TrainingExample::group(vec![p.clone(), k.clone(), d.clone(), r]).unwrap();
        assert_eq!(g.len(), 2);
        assert!(TrainingExample::group(vec![k, d]).is_err());
        assert!(TrainingExample::group(vec![masked(vec![3], vec![0], Variant::MaskClues)]).is_err());
    }
}
