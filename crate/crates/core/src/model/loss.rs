//! Training objectives.
//!
//! * `L_mlm`: mean cross-entropy over the keep-clues (or plain) mask positions.
//! * `L_con`: mean truth probability of the object tokens with clues masked,
//!   minus the same with clues kept. Minimizing it widens the gap in favour
//!   of the clue-bearing context.
//! * `L_cls`: mean cross-entropy of the three-way classifier applied to the
//!   object-position embeddings of all three variants.
//!
//! Batch losses average over the examples that define each term.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::network::{self, Cache};
use super::params::Params;
use super::{ModelError, ModelState};
use crate::masking::{MaskedSample, Variant};

#[derive(Debug, Clone, PartialEq)]
pub enum TrainingExample {
    /// A single masked input trained with the MLM loss only.
    Plain(MaskedSample),
    /// Keep-clues, mask-clues and mask-random inputs built from one sample.
    Triple {
        keep: MaskedSample,
        drop: MaskedSample,
        randv: MaskedSample,
    },
}

impl TrainingExample {
    pub fn triple(keep: MaskedSample, drop: MaskedSample, randv: MaskedSample) -> Self {
        Self::Triple { keep, drop, randv }
    }

    /// Groups masked samples: consecutive keep/mask-clues/mask-random runs
    /// become triples, plain samples stand alone.
    pub fn group(samples: Vec<MaskedSample>) -> Result<Vec<Self>, ModelError> {
        let mut out = Vec::new();
        let mut iter = samples.into_iter();
        while let Some(first) = iter.next() {
            match first.variant {
                Variant::Plain => out.push(Self::Plain(first)),
                Variant::KeepClues => {
                    let (Some(drop), Some(randv)) = (iter.next(), iter.next()) else {
                        return Err(ModelError::BadExample("truncated triple".into()));
                    };
                    if drop.variant != Variant::MaskClues || randv.variant != Variant::MaskRandom {
                        return Err(ModelError::BadExample(format!(
                            "expected mask_clues, mask_random after keep_clues in {}",
                            first.doc_id
                        )));
                    }
                    out.push(Self::triple(first, drop, randv));
                }
                other => {
                    return Err(ModelError::BadExample(format!(
                        "unexpected {other:?} sample outside a triple in {}",
                        first.doc_id
                    )))
                }
            }
        }
        Ok(out)
    }

    pub fn keep(&self) -> &MaskedSample {
        match self {
            Self::Plain(m) => m,
            Self::Triple { keep, .. } => keep,
        }
    }
}

/// Which terms contribute to the gradient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub mlm: f64,
    pub con: f64,
    pub cls: f64,
}

impl LossWeights {
    pub const MLM: Self = Self { mlm: 1.0, con: 0.0, cls: 0.0 };
    pub const CON: Self = Self { mlm: 0.0, con: 1.0, cls: 0.0 };
    pub const CLS: Self = Self { mlm: 0.0, con: 0.0, cls: 1.0 };

    pub fn total(lambda_con: f64, lambda_cls: f64) -> Self {
        Self {
            mlm: 1.0,
            con: lambda_con,
            cls: lambda_cls,
        }
    }

    pub fn combine(&self, l: &LossBreakdown) -> f64 {
        self.mlm * l.mlm + self.con * l.con + self.cls * l.cls
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    #[serde(rename = "L_mlm")]
    pub mlm: f64,
    #[serde(rename = "L_con")]
    pub con: f64,
    #[serde(rename = "L_cls")]
    pub cls: f64,
    #[serde(rename = "L_total")]
    pub total: f64,
}

impl LossBreakdown {
    pub fn is_finite(&self) -> bool {
        self.mlm.is_finite() && self.con.is_finite() && self.cls.is_finite() && self.total.is_finite()
    }
}

struct Head<'a> {
    params: &'a Params,
    grads: Option<&'a mut Params>,
}

impl Head<'_> {
    /// Adds `w · CE(target)` at `pos`; returns the CE value.
    fn cross_entropy(&mut self, cache: &Cache, dy: &mut Array2<f64>, pos: usize, target: u32, w: f64) -> f64 {
        let y = cache.y.row(pos);
        let probs = network::lm_probs(self.params, y);
        let pt = probs[target as usize];
        if let Some(g) = self.grads.as_deref_mut() {
            if w != 0.0 {
                let mut dlogits = probs * w;
                dlogits[target as usize] -= w;
                network::lm_backward(self.params, y, &dlogits, dy, pos, g);
            }
        }
        -pt.max(f64::MIN_POSITIVE).ln()
    }

    /// Adds `w · p(target)` at `pos`; returns the probability.
    fn truth_prob(&mut self, cache: &Cache, dy: &mut Array2<f64>, pos: usize, target: u32, w: f64) -> f64 {
        let y = cache.y.row(pos);
        let probs = network::lm_probs(self.params, y);
        let pt = probs[target as usize];
        if let Some(g) = self.grads.as_deref_mut() {
            if w != 0.0 {
                // d p_t / d logits = p_t (e_t - p)
                let mut dlogits = probs * (-w * pt);
                dlogits[target as usize] += w * pt;
                network::lm_backward(self.params, y, &dlogits, dy, pos, g);
            }
        }
        pt
    }

    fn classify(&mut self, cache: &Cache, dy: &mut Array2<f64>, pos: usize, label: usize, w: f64) -> f64 {
        let y = cache.y.row(pos);
        let probs = network::cls_probs(self.params, y);
        if let Some(g) = self.grads.as_deref_mut() {
            if w != 0.0 {
                let mut dz = probs.map(|p| p * w);
                dz[label] -= w;
                network::cls_backward(self.params, y, dz, dy, pos, g);
            }
        }
        -probs[label].max(f64::MIN_POSITIVE).ln()
    }

    fn finish(&mut self, cache: &Cache, dy: Array2<f64>) {
        if let Some(g) = self.grads.as_deref_mut() {
            network::backward(self.params, cache, dy, g);
        }
    }
}

/// Loss values and, when `with_grad`, the gradient of `weights · losses`.
pub(crate) fn evaluate(
    state: &ModelState,
    batch: &[TrainingExample],
    weights: LossWeights,
    with_grad: bool,
) -> Result<(LossBreakdown, Option<Params>), ModelError> {
    for ex in batch {
        match ex {
            TrainingExample::Plain(m) => state.check_input(m)?,
            TrainingExample::Triple { keep, drop, randv } => {
                state.check_input(keep)?;
                state.check_input(drop)?;
                state.check_input(randv)?;
            }
        }
    }
    let n_mlm = batch.len();
    let n_tri = batch
        .iter()
        .filter(|e| matches!(e, TrainingExample::Triple { .. }))
        .count();
    let p = &state.params;
    let mut grads = with_grad.then(|| p.zeros_like());
    let mut head = Head {
        params: p,
        grads: grads.as_mut(),
    };
    let mut out = LossBreakdown::default();

    for ex in batch {
        let keep = ex.keep();
        let m = keep.mask_positions.len();
        if m == 0 {
            return Err(ModelError::EmptyMaskSet);
        }
        let w_mlm = weights.mlm / (n_mlm * m) as f64;
        let keep_cache = network::encode(p, &keep.input_ids);
        let mut dy_keep = Array2::zeros(keep_cache.y.raw_dim());
        let mut ce = 0.0;
        for (&pos, &t) in keep.mask_positions.iter().zip(&keep.targets) {
            ce += head.cross_entropy(&keep_cache, &mut dy_keep, pos, t, w_mlm);
        }
        out.mlm += ce / (n_mlm * m) as f64;

        let TrainingExample::Triple { drop, randv, .. } = ex else {
            head.finish(&keep_cache, dy_keep);
            continue;
        };
        let drop_cache = network::encode(p, &drop.input_ids);
        let rand_cache = network::encode(p, &randv.input_ids);
        let mut dy_drop = Array2::zeros(drop_cache.y.raw_dim());
        let mut dy_rand = Array2::zeros(rand_cache.y.raw_dim());

        // object positions are exactly the keep-clues mask positions
        let w_con = weights.con / (n_tri * m) as f64;
        let mut p_keep = 0.0;
        let mut p_drop = 0.0;
        for (&pos, &t) in keep.mask_positions.iter().zip(&keep.targets) {
            p_keep += head.truth_prob(&keep_cache, &mut dy_keep, pos, t, -w_con);
            p_drop += head.truth_prob(&drop_cache, &mut dy_drop, pos, t, w_con);
        }
        out.con += (p_drop - p_keep) / (n_tri * m) as f64;

        let w_cls = weights.cls / (n_tri * 3 * m) as f64;
        let mut cls = 0.0;
        for &pos in &keep.mask_positions {
            cls += head.classify(&keep_cache, &mut dy_keep, pos, 0, w_cls);
            cls += head.classify(&drop_cache, &mut dy_drop, pos, 1, w_cls);
            cls += head.classify(&rand_cache, &mut dy_rand, pos, 2, w_cls);
        }
        out.cls += cls / (n_tri * 3 * m) as f64;

        head.finish(&keep_cache, dy_keep);
        head.finish(&drop_cache, dy_drop);
        head.finish(&rand_cache, dy_rand);
    }
    out.total = weights.combine(&out);
    if !out.is_finite() {
        return Err(ModelError::NonFiniteLoss { step: None });
    }
    Ok((out, grads))
}
