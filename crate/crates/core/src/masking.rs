//! Tokenization of aligned paragraphs and construction of masked inputs.
//!
//! Every masking scheme replaces tokens one-for-one with the mask sentinel.
//! The deterministic objectives build on one tokenized sample with roles:
//!
//! * keep-clues: mask the object only
//! * mask-clues: mask the object and every subject/predicate clue token
//! * mask-random: mask the object and as many randomly chosen context tokens
//!   as there are clue tokens, so the mask count matches mask-clues

use std::collections::HashMap;
use std::fmt;
use std::ops::Range;

use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::align::{AlignedSample, AlignedTriplet, EntityMention, ObjectGroup};
use crate::text::{pre_tokenize, RawToken};

pub const PAD_ID: u32 = 0;
pub const UNK_ID: u32 = 1;
pub const MASK_ID: u32 = 2;
pub const PAD_TOKEN: &str = "[PAD]";
pub const UNK_TOKEN: &str = "[UNK]";
pub const MASK_TOKEN: &str = "[MASK]";
const SPECIALS: [&str; 3] = [PAD_TOKEN, UNK_TOKEN, MASK_TOKEN];

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MaskError {
    #[error("scheme {0} has no maskable content in this sample")]
    NoMaskableContent(MaskScheme),
    #[error("sample has no object tokens")]
    NoObject,
    #[error("sample has no clue tokens")]
    NoClues,
    #[error("only {available} context tokens available, {needed} needed")]
    InsufficientContext { available: usize, needed: usize },
    #[error("invalid vocabulary: {0}")]
    BadVocabulary(String),
}

/// Closed word-level vocabulary. Ids 0..3 are `[PAD]`, `[UNK]`, `[MASK]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocabulary {
    /// Builds a vocabulary from token frequencies, most frequent first,
    /// ties broken alphabetically.
    pub fn build<'a>(texts: impl IntoIterator<Item = &'a str>, min_count: usize) -> Self {
        let mut counts: HashMap<String, usize> = HashMap::new();
        for text in texts {
            for t in pre_tokenize(text) {
                *counts.entry(t.text).or_default() += 1;
            }
        }
        let mut entries: Vec<(String, usize)> = counts
            .into_iter()
            .filter(|(t, c)| *c >= min_count && !SPECIALS.contains(&t.as_str()))
            .collect();
        entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let tokens = SPECIALS
            .iter()
            .map(|s| s.to_string())
            .chain(entries.into_iter().map(|(t, _)| t))
            .collect();
        Self::from_tokens(tokens).expect("specials are in place")
    }

    pub fn from_tokens(tokens: Vec<String>) -> Result<Self, MaskError> {
        if tokens.len() < SPECIALS.len() || tokens[..3] != SPECIALS {
            return Err(MaskError::BadVocabulary(format!(
                "first entries must be {SPECIALS:?}"
            )));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i as u32).is_some() {
                return Err(MaskError::BadVocabulary(format!("duplicate token {t:?}")));
            }
        }
        Ok(Self { tokens, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Id of a folded token; unknown tokens map to `[UNK]`.
    pub fn id(&self, token: &str) -> u32 {
        self.index.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn get(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: u32) -> &str {
        self.tokens.get(id as usize).map(String::as_str).unwrap_or(UNK_TOKEN)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn is_special(id: u32) -> bool {
        (id as usize) < SPECIALS.len()
    }

    /// First id that is not a sentinel.
    pub const FIRST_CONTENT_ID: u32 = SPECIALS.len() as u32;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Other,
    SubjectClue,
    PredicateClue,
    Object,
    /// Clue of another aligned triplet in the same paragraph; never picked
    /// as a random context token.
    ForeignClue,
}

impl Role {
    pub fn is_clue(self) -> bool {
        matches!(self, Role::SubjectClue | Role::PredicateClue)
    }
}

/// Char-offset annotations used to tag tokens with roles.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Annotations {
    pub object: Option<(usize, usize)>,
    pub subject_clues: Vec<(usize, usize)>,
    pub predicate_clues: Vec<(usize, usize)>,
    pub foreign_clues: Vec<(usize, usize)>,
    pub entities: Vec<(usize, usize)>,
}

impl Annotations {
    pub fn for_triplet(t: &AlignedTriplet) -> Self {
        Self {
            object: Some(t.object_span.range()),
            subject_clues: vec![t.subject_span.range()],
            predicate_clues: vec![t.predicate_span.range()],
            foreign_clues: Vec::new(),
            entities: vec![t.subject_span.range(), t.object_span.range()],
        }
    }

    /// The group's object, all of its clues, and the clues of every other
    /// aligned triplet in the paragraph as foreign clues.
    pub fn for_group(sample: &AlignedSample, group: &ObjectGroup<'_>) -> Self {
        let mut ann = Self {
            object: Some(group.object_span.range()),
            entities: sample.entity_spans.iter().map(|m| m.span.range()).collect(),
            ..Self::default()
        };
        for t in &group.triplets {
            ann.subject_clues.push(t.subject_span.range());
            ann.predicate_clues.push(t.predicate_span.range());
        }
        for t in &sample.aligned {
            if t.object_span != *group.object_span {
                ann.foreign_clues.push(t.subject_span.range());
                ann.foreign_clues.push(t.predicate_span.range());
            }
        }
        ann
    }

    pub fn entities_only(mentions: &[EntityMention]) -> Self {
        Self {
            entities: mentions.iter().map(|m| m.span.range()).collect(),
            ..Self::default()
        }
    }
}

fn inside(tok: &RawToken, (s, e): (usize, usize)) -> bool {
    s <= tok.start && tok.end <= e
}

/// A token takes a role only if it lies entirely inside the span. Priority
/// is object, subject clue, predicate clue, foreign clue.
pub fn assign_roles(tokens: &[RawToken], ann: &Annotations) -> Vec<Role> {
    tokens
        .iter()
        .map(|t| {
            if ann.object.is_some_and(|o| inside(t, o)) {
                Role::Object
            } else if ann.subject_clues.iter().any(|&s| inside(t, s)) {
                Role::SubjectClue
            } else if ann.predicate_clues.iter().any(|&s| inside(t, s)) {
                Role::PredicateClue
            } else if ann.foreign_clues.iter().any(|&s| inside(t, s)) {
                Role::ForeignClue
            } else {
                Role::Other
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenizedSample {
    pub doc_id: String,
    pub tokens: Vec<u32>,
    pub token_spans: Vec<(usize, usize)>,
    pub roles: Vec<Role>,
    pub word_starts: Vec<bool>,
    /// Token ranges of entity mentions that cover at least one whole token.
    pub entity_ranges: Vec<Range<usize>>,
}

impl TokenizedSample {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn positions_with(&self, pred: impl Fn(Role) -> bool) -> Vec<usize> {
        self.roles
            .iter()
            .enumerate()
            .filter(|(_, r)| pred(**r))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn object_positions(&self) -> Vec<usize> {
        self.positions_with(|r| r == Role::Object)
    }

    pub fn clue_positions(&self) -> Vec<usize> {
        self.positions_with(Role::is_clue)
    }

    /// Token ranges of whole words.
    pub fn words(&self) -> Vec<Range<usize>> {
        let mut out: Vec<Range<usize>> = Vec::new();
        for (i, &start) in self.word_starts.iter().enumerate() {
            match out.last_mut() {
                Some(w) if !start => w.end = i + 1,
                _ => out.push(i..i + 1),
            }
        }
        out
    }

    /// Cuts the sample to at most `max_len` tokens, keeping every object and
    /// clue token inside the window. Returns `None` if they do not fit.
    pub fn crop(&self, max_len: usize) -> Option<TokenizedSample> {
        let n = self.len();
        if n <= max_len {
            return Some(self.clone());
        }
        let focus = self.positions_with(|r| r == Role::Object || r.is_clue());
        let start = match (focus.first(), focus.last()) {
            (Some(&lo), Some(&hi)) => {
                let width = hi - lo + 1;
                if width > max_len {
                    return None;
                }
                lo.saturating_sub((max_len - width) / 2).min(n - max_len)
            }
            _ => 0,
        };
        let end = start + max_len;
        let mut word_starts = self.word_starts[start..end].to_vec();
        word_starts[0] = true;
        Some(TokenizedSample {
            doc_id: self.doc_id.clone(),
            tokens: self.tokens[start..end].to_vec(),
            token_spans: self.token_spans[start..end].to_vec(),
            roles: self.roles[start..end].to_vec(),
            word_starts,
            entity_ranges: self
                .entity_ranges
                .iter()
                .filter(|r| r.start >= start && r.end <= end)
                .map(|r| r.start - start..r.end - start)
                .collect(),
        })
    }
}

/// Tokenizes `text` and tags roles from the given annotations.
pub fn tokenize_annotated(
    doc_id: &str,
    text: &str,
    vocab: &Vocabulary,
    ann: &Annotations,
) -> TokenizedSample {
    let raw = pre_tokenize(text);
    let roles = assign_roles(&raw, ann);
    let entity_ranges = ann
        .entities
        .iter()
        .filter_map(|&span| {
            let first = raw.iter().position(|t| inside(t, span))?;
            let len = raw[first..].iter().take_while(|t| inside(t, span)).count();
            Some(first..first + len)
        })
        .collect();
    TokenizedSample {
        doc_id: doc_id.to_string(),
        tokens: raw.iter().map(|t| vocab.id(&t.text)).collect(),
        token_spans: raw.iter().map(|t| (t.start, t.end)).collect(),
        word_starts: raw.iter().map(|t| t.word_start).collect(),
        roles,
        entity_ranges,
    }
}

/// Tokenizes text with roles from a single aligned triplet (or none).
pub fn tokenize(text: &str, vocab: &Vocabulary, aligned: Option<&AlignedTriplet>) -> TokenizedSample {
    let ann = aligned.map(Annotations::for_triplet).unwrap_or_default();
    tokenize_annotated("", text, vocab, &ann)
}

/// One tokenized sample per object group of an aligned paragraph.
pub fn samples_from_aligned(sample: &AlignedSample, vocab: &Vocabulary) -> Vec<TokenizedSample> {
    sample
        .object_groups()
        .iter()
        .map(|g| {
            tokenize_annotated(
                &sample.paragraph.doc_id,
                &sample.paragraph.text,
                vocab,
                &Annotations::for_group(sample, g),
            )
        })
        .collect()
}

/// Tokenized sample for salient span masking (entities only, no roles).
pub fn salient_sample(
    doc_id: &str,
    text: &str,
    mentions: &[EntityMention],
    vocab: &Vocabulary,
) -> TokenizedSample {
    tokenize_annotated(doc_id, text, vocab, &Annotations::entities_only(mentions))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskScheme {
    RandomToken,
    WholeWord,
    SalientSpan,
    ObjectSpan,
    Deterministic,
}

impl MaskScheme {
    pub const ALL: [MaskScheme; 5] = [
        MaskScheme::RandomToken,
        MaskScheme::WholeWord,
        MaskScheme::SalientSpan,
        MaskScheme::ObjectSpan,
        MaskScheme::Deterministic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MaskScheme::RandomToken => "random_token",
            MaskScheme::WholeWord => "whole_word",
            MaskScheme::SalientSpan => "salient_span",
            MaskScheme::ObjectSpan => "object_span",
            MaskScheme::Deterministic => "deterministic",
        }
    }
}

impl fmt::Display for MaskScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for MaskScheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.replace('-', "_");
        Self::ALL
            .into_iter()
            .find(|m| m.name() == norm)
            .ok_or_else(|| format!("unknown masking scheme {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Plain,
    KeepClues,
    MaskClues,
    MaskRandom,
}

impl Variant {
    /// Class index for the three-way clue classifier.
    pub fn class_index(self) -> Option<usize> {
        match self {
            Variant::KeepClues => Some(0),
            Variant::MaskClues => Some(1),
            Variant::MaskRandom => Some(2),
            Variant::Plain => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskedSample {
    pub doc_id: String,
    pub scheme: MaskScheme,
    pub variant: Variant,
    pub input_ids: Vec<u32>,
    /// Strictly increasing.
    pub mask_positions: Vec<usize>,
    pub targets: Vec<u32>,
}

impl MaskedSample {
    fn from_positions(
        sample: &TokenizedSample,
        mut positions: Vec<usize>,
        scheme: MaskScheme,
        variant: Variant,
    ) -> Self {
        positions.sort_unstable();
        positions.dedup();
        let mut input_ids = sample.tokens.clone();
        let targets = positions
            .iter()
            .map(|&p| std::mem::replace(&mut input_ids[p], MASK_ID))
            .collect();
        Self {
            doc_id: sample.doc_id.clone(),
            scheme,
            variant,
            input_ids,
            mask_positions: positions,
            targets,
        }
    }

    /// Original token sequence.
    pub fn unmask(&self) -> Vec<u32> {
        let mut ids = self.input_ids.clone();
        for (&p, &t) in self.mask_positions.iter().zip(&self.targets) {
            ids[p] = t;
        }
        ids
    }
}

/// Seeded stream for sample `index`; independent of processing order.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    // splitmix64 finalizer over the pair
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    ChaCha8Rng::seed_from_u64(z ^ (z >> 31))
}

/// Masks a sample under a baseline or deterministic scheme.
pub fn apply_mask<R: Rng + ?Sized>(
    sample: &TokenizedSample,
    scheme: MaskScheme,
    rng: &mut R,
) -> Result<MaskedSample, MaskError> {
    let object = sample.object_positions();
    let none = || MaskError::NoMaskableContent(scheme);
    let positions = match scheme {
        MaskScheme::Deterministic | MaskScheme::ObjectSpan => {
            if object.is_empty() {
                return Err(none());
            }
            object
        }
        MaskScheme::RandomToken => {
            let k = object.len();
            if k == 0 {
                return Err(none());
            }
            sample_indices(rng, sample.len(), k).into_vec()
        }
        MaskScheme::WholeWord => {
            let words = sample.words();
            let k = words
                .iter()
                .filter(|w| (*w).clone().any(|i| sample.roles[i] == Role::Object))
                .count();
            if k == 0 {
                return Err(none());
            }
            sample_indices(rng, words.len(), k)
                .into_iter()
                .flat_map(|w| words[w].clone())
                .collect()
        }
        MaskScheme::SalientSpan => {
            if sample.entity_ranges.is_empty() {
                return Err(none());
            }
            let pick = rng.random_range(0..sample.entity_ranges.len());
            sample.entity_ranges[pick].clone().collect()
        }
    };
    Ok(MaskedSample::from_positions(
        sample,
        positions,
        scheme,
        Variant::Plain,
    ))
}

/// Keep-clues and mask-clues inputs for the clue contrastive objective.
pub fn make_contrastive_pair(
    sample: &TokenizedSample,
) -> Result<(MaskedSample, MaskedSample), MaskError> {
    let object = sample.object_positions();
    if object.is_empty() {
        return Err(MaskError::NoObject);
    }
    let clues = sample.clue_positions();
    if clues.is_empty() {
        return Err(MaskError::NoClues);
    }
    let keep = MaskedSample::from_positions(
        sample,
        object.clone(),
        MaskScheme::Deterministic,
        Variant::KeepClues,
    );
    let drop = MaskedSample::from_positions(
        sample,
        object.into_iter().chain(clues).collect(),
        MaskScheme::Deterministic,
        Variant::MaskClues,
    );
    Ok((keep, drop))
}

/// Keep-clues, mask-clues and mask-random inputs for clue classification.
/// The random variant masks exactly as many `Other` tokens as there are clue
/// tokens, chosen without replacement.
pub fn make_classification_triple<R: Rng + ?Sized>(
    sample: &TokenizedSample,
    rng: &mut R,
) -> Result<[MaskedSample; 3], MaskError> {
    let (keep, drop) = make_contrastive_pair(sample)?;
    let needed = sample.clue_positions().len();
    let others = sample.positions_with(|r| r == Role::Other);
    if others.len() < needed {
        return Err(MaskError::InsufficientContext {
            available: others.len(),
            needed,
        });
    }
    let random = sample_indices(rng, others.len(), needed)
        .into_iter()
        .map(|i| others[i]);
    let randv = MaskedSample::from_positions(
        sample,
        sample.object_positions().into_iter().chain(random).collect(),
        MaskScheme::Deterministic,
        Variant::MaskRandom,
    );
    Ok([keep, drop, randv])
}

/// One line of `masked.jsonl`. Lines of one classification triple share `sample`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskedRecord {
    pub doc_id: String,
    pub sample: u64,
    pub scheme: MaskScheme,
    pub variant: Variant,
    pub input_ids: Vec<u32>,
    pub mask_positions: Vec<usize>,
    pub targets: Vec<u32>,
}

impl MaskedRecord {
    pub fn new(sample: u64, m: MaskedSample) -> Self {
        Self {
            doc_id: m.doc_id,
            sample,
            scheme: m.scheme,
            variant: m.variant,
            input_ids: m.input_ids,
            mask_positions: m.mask_positions,
            targets: m.targets,
        }
    }

    pub fn into_masked(self) -> MaskedSample {
        MaskedSample {
            doc_id: self.doc_id,
            scheme: self.scheme,
            variant: self.variant,
            input_ids: self.input_ids,
            mask_positions: self.mask_positions,
            targets: self.targets,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::align::{Aligner, Paragraph};
    use crate::kb::KbBuilder;

    fn film_sample() -> (TokenizedSample, Vocabulary) {
        let kb = KbBuilder::new()
            .entity("Q1", "War Horse", &[])
            .unwrap()
            .entity("Q2", "Steven Spielberg", &[])
            .unwrap()
            .predicate("P57", &["directed by"])
            .unwrap()
            .triplet("Q1", "P57", "Q2")
            .unwrap()
            .build()
            .unwrap();
        let text = "War Horse, a 2011 drama, was directed by Steven Spielberg .";
        let aligned = Aligner::new(&kb).align_paragraph(&Paragraph::new("film", text));
        let vocab = Vocabulary::build([text], 1);
        let mut s = samples_from_aligned(&aligned, &vocab);
        (s.remove(0), vocab)
    }

    #[test]
    fn tokenize_simple() {
        let vocab = Vocabulary::build(["war horse ."], 1);
        let s = tokenize("War Horse.", &vocab, None);
        let toks: Vec<_> = s.tokens.iter().map(|&t| vocab.token(t)).collect();
        assert_eq!(toks, ["war", "horse", "."]);
        assert_eq!(s.word_starts, [true, true, true]);
    }

    #[test]
    fn unknown_tokens_map_to_unk() {
        let vocab = Vocabulary::build(["war"], 1);
        let s = tokenize("war horse", &vocab, None);
        assert_eq!(s.tokens[1], UNK_ID);
    }

    #[test]
    fn object_tokens_tagged() {
        let (s, vocab) = film_sample();
        let obj: Vec<_> = s
            .object_positions()
            .iter()
            .map(|&i| vocab.token(s.tokens[i]).to_string())
            .collect();
        assert_eq!(obj, ["steven", "spielberg"]);
        assert_eq!(s.clue_positions().len(), 4);
    }

    #[test]
    fn straddling_token_is_other() {
        let ann = Annotations {
            object: Some((2, 7)),
            ..Annotations::default()
        };
        let raw = pre_tokenize("abcd efgh");
        assert_eq!(assign_roles(&raw, &ann), [Role::Other, Role::Other]);
    }

    #[test]
    fn deterministic_masks_object() {
        let (s, vocab) = film_sample();
        let m = apply_mask(&s, MaskScheme::Deterministic, &mut sample_rng(0, 0)).unwrap();
        let targets: Vec<_> = m.targets.iter().map(|&t| vocab.token(t)).collect();
        assert_eq!(targets, ["steven", "spielberg"]);
        assert_eq!(m.unmask(), s.tokens);
    }

    #[test]
    fn random_token_count() {
        let vocab = Vocabulary::build(["a b c d e f g"], 1);
        let ann = Annotations {
            object: Some((0, 5)),
            ..Annotations::default()
        };
        let s = tokenize_annotated("d", "a b c d e f g", &vocab, &ann);
        let m = apply_mask(&s, MaskScheme::RandomToken, &mut sample_rng(1, 2)).unwrap();
        assert_eq!(m.mask_positions.len(), 3);
    }

    #[test]
    fn whole_word_singleton() {
        let vocab = Vocabulary::build(["spielberg"], 1);
        let ann = Annotations {
            object: Some((0, 9)),
            ..Annotations::default()
        };
        let s = tokenize_annotated("d", "Spielberg", &vocab, &ann);
        let m = apply_mask(&s, MaskScheme::WholeWord, &mut sample_rng(0, 0)).unwrap();
        assert_eq!(m.mask_positions, [0]);
    }

    #[test]
    fn salient_requires_entities() {
        let vocab = Vocabulary::build(["x"], 1);
        let s = tokenize("x y", &vocab, None);
        assert_eq!(
            apply_mask(&s, MaskScheme::SalientSpan, &mut sample_rng(0, 0)),
            Err(MaskError::NoMaskableContent(MaskScheme::SalientSpan))
        );
    }

    #[test]
    fn contrastive_pair_shapes() {
        let (s, _) = film_sample();
        let (keep, drop) = make_contrastive_pair(&s).unwrap();
        assert_eq!(keep.mask_positions.len(), 2);
        assert_eq!(drop.mask_positions.len(), 2 + 4);
        let obj = s.object_positions();
        for (p, t) in keep.mask_positions.iter().zip(&keep.targets) {
            let k = drop.mask_positions.iter().position(|q| q == p).unwrap();
            assert_eq!(drop.targets[k], *t);
        }
        for i in s.positions_with(|r| r == Role::Other) {
            assert_eq!(keep.input_ids[i], s.tokens[i]);
            assert_eq!(drop.input_ids[i], s.tokens[i]);
        }
        assert!(obj.iter().all(|p| keep.mask_positions.contains(p)));
    }

    #[test]
    fn classification_triple_counts() {
        let (s, _) = film_sample();
        let [a, b, c] = make_classification_triple(&s, &mut sample_rng(3, 0)).unwrap();
        assert_eq!(a.mask_positions.len(), 2);
        assert_eq!(b.mask_positions.len(), c.mask_positions.len());
        for &p in &c.mask_positions {
            assert!(matches!(s.roles[p], Role::Object | Role::Other));
        }
    }

    #[test]
    fn insufficient_context() {
        let vocab = Vocabulary::build(["a b c"], 1);
        let ann = Annotations {
            object: Some((0, 1)),
            subject_clues: vec![(2, 3)],
            predicate_clues: vec![(4, 5)],
            ..Annotations::default()
        };
        let s = tokenize_annotated("d", "a b c", &vocab, &ann);
        assert_eq!(
            make_classification_triple(&s, &mut sample_rng(0, 0)).unwrap_err(),
            MaskError::InsufficientContext {
                available: 0,
                needed: 2
            }
        );
    }

    #[test]
    fn crop_keeps_focus() {
        let (s, _) = film_sample();
        assert_eq!(s.len(), 13);
        let c = s.crop(12).unwrap();
        assert_eq!(c.len(), 12);
        assert_eq!(c.object_positions().len(), 2);
        assert_eq!(c.clue_positions().len(), 4);
        assert!(s.crop(11).is_none());
    }

    #[test]
    fn scheme_names_parse() {
        for m in MaskScheme::ALL {
            assert_eq!(m.name().parse::<MaskScheme>().unwrap(), m);
        }
        assert_eq!("random-token".parse::<MaskScheme>().unwrap(), MaskScheme::RandomToken);
    }
}
