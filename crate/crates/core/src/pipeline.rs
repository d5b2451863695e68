//! Dataset-level glue between alignment, masking and training.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::align::{AlignedSample, EntityMention, Paragraph};
use crate::masking::{
    apply_mask, make_classification_triple, salient_sample, sample_rng, samples_from_aligned,
    MaskError, MaskScheme, MaskedRecord, TokenizedSample, Vocabulary,
};
use crate::model::{avg_truth_prob, ModelError, ModelState, TrainingExample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    /// One masked input per sample.
    Mlm,
    /// Keep-clues, mask-clues and mask-random inputs per sample.
    ConCls,
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Objective::Mlm => "mlm",
            Objective::ConCls => "con-cls",
        })
    }
}

impl FromStr for Objective {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mlm" => Ok(Objective::Mlm),
            "con-cls" | "con_cls" => Ok(Objective::ConCls),
            _ => Err(format!("unknown objective {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MaskPlan {
    pub scheme: MaskScheme,
    pub objective: Objective,
    pub seed: u64,
    pub max_len: usize,
}

/// Samples read, records written and samples skipped by reason.
/// `samples = emitted + Σ skipped`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskCounters {
    pub samples: u64,
    pub emitted: u64,
    pub records: u64,
    pub skipped: BTreeMap<String, u64>,
}

impl MaskCounters {
    fn skip(&mut self, reason: &str) {
        *self.skipped.entry(reason.to_string()).or_default() += 1;
    }

    pub fn skipped_total(&self) -> u64 {
        self.skipped.values().sum()
    }
}

fn skip_reason(e: &MaskError) -> &'static str {
    match e {
        MaskError::NoMaskableContent(_) => "no_maskable_content",
        MaskError::NoObject => "no_object",
        MaskError::NoClues => "no_clues",
        MaskError::InsufficientContext { .. } => "insufficient_context",
        MaskError::BadVocabulary(_) => "bad_vocabulary",
    }
}

/// Masks tokenized samples; sample `k` draws from `sample_rng(seed, k)`.
pub fn mask_tokenized(
    samples: impl IntoIterator<Item = TokenizedSample>,
    plan: &MaskPlan,
) -> (Vec<MaskedRecord>, MaskCounters) {
    let mut out = Vec::new();
    let mut counters = MaskCounters::default();
    for (k, sample) in samples.into_iter().enumerate() {
        counters.samples += 1;
        let Some(sample) = sample.crop(plan.max_len) else {
            counters.skip("too_long");
            continue;
        };
        let mut rng = sample_rng(plan.seed, k as u64);
        let masked = match plan.objective {
            Objective::Mlm => apply_mask(&sample, plan.scheme, &mut rng).map(|m| vec![m]),
            Objective::ConCls => make_classification_triple(&sample, &mut rng).map(Vec::from),
        };
        match masked {
            Ok(ms) => {
                counters.emitted += 1;
                counters.records += ms.len() as u64;
                out.extend(ms.into_iter().map(|m| MaskedRecord::new(k as u64, m)));
            }
            Err(e) => counters.skip(skip_reason(&e)),
        }
    }
    (out, counters)
}

/// One tokenized sample per object group, in dataset order.
pub fn tokenize_dataset<'a>(
    samples: impl IntoIterator<Item = &'a AlignedSample> + 'a,
    vocab: &'a Vocabulary,
) -> impl Iterator<Item = TokenizedSample> + 'a {
    samples
        .into_iter()
        .flat_map(move |s| samples_from_aligned(s, vocab))
}

/// Masks the deterministic dataset.
pub fn mask_dataset(
    samples: &[AlignedSample],
    vocab: &Vocabulary,
    plan: &MaskPlan,
) -> (Vec<MaskedRecord>, MaskCounters) {
    mask_tokenized(tokenize_dataset(samples, vocab), plan)
}

/// Masks salient-span paragraphs (one sample per paragraph).
pub fn mask_salient(
    paragraphs: &[(Paragraph, Vec<EntityMention>)],
    vocab: &Vocabulary,
    plan: &MaskPlan,
) -> (Vec<MaskedRecord>, MaskCounters) {
    mask_tokenized(
        paragraphs
            .iter()
            .map(|(p, m)| salient_sample(&p.doc_id, &p.text, m, vocab)),
        plan,
    )
}

/// Vocabulary over paragraph texts.
pub fn vocabulary_for<'a>(texts: impl IntoIterator<Item = &'a str>) -> Vocabulary {
    Vocabulary::build(texts, 1)
}

/// Groups masked records into training examples in record order.
pub fn training_examples(records: Vec<MaskedRecord>) -> Result<Vec<TrainingExample>, ModelError> {
    TrainingExample::group(records.into_iter().map(MaskedRecord::into_masked).collect())
}

/// Held-out behaviour of a model on classification triples.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TripleEval {
    pub triples: usize,
    /// Triples where the object is more probable with clues kept than masked.
    pub keep_beats_drop: usize,
    /// Variants (three per triple) classified correctly.
    pub classified: usize,
    pub mean_keep_prob: f64,
    pub mean_drop_prob: f64,
}

impl TripleEval {
    pub fn contrastive_rate(&self) -> f64 {
        self.keep_beats_drop as f64 / self.triples.max(1) as f64
    }

    pub fn classification_accuracy(&self) -> f64 {
        self.classified as f64 / (3 * self.triples).max(1) as f64
    }
}

/// Scores every triple example; plain examples are ignored.
pub fn evaluate_triples(state: &ModelState, examples: &[TrainingExample]) -> Result<TripleEval, ModelError> {
    let mut out = TripleEval::default();
    for ex in examples {
        let TrainingExample::Triple { keep, drop, randv } = ex else {
            continue;
        };
        let (pos, targets) = (&keep.mask_positions, &keep.targets);
        let p_keep = avg_truth_prob(&state.forward(&keep.input_ids)?, pos, targets)?;
        let p_drop = avg_truth_prob(&state.forward(&drop.input_ids)?, pos, targets)?;
        out.triples += 1;
        out.keep_beats_drop += usize::from(p_keep > p_drop);
        out.mean_keep_prob += p_keep;
        out.mean_drop_prob += p_drop;
        for (label, m) in [keep, drop, randv].into_iter().enumerate() {
            out.classified += usize::from(state.classify(&m.input_ids, pos)? == label);
        }
    }
    let n = out.triples.max(1) as f64;
    out.mean_keep_prob /= n;
    out.mean_drop_prob /= n;
    Ok(out)
}
