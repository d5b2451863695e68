//! Multi-prompt cloze probing: template instantiation, leakage filtering and
//! accuracy / pairwise consistency / joint metrics with domain and
//! relation-type splits.
//!
//! Consistency counts agreeing prompt pairs regardless of correctness. Joint
//! is the fraction of facts whose every prompt is answered correctly.

use std::collections::{BTreeSet, HashMap};
use std::io::BufRead;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kb::{EntityId, KbError, KnowledgeBase, PredicateId, Triplet};
use crate::masking::{Vocabulary, MASK_TOKEN};
use crate::model::{ModelError, ModelState};
use crate::text::{fold, token_strings};

pub const SUBJECT_SLOT: &str = "[X]";
pub const OBJECT_SLOT: &str = "[Y]";
pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ProbeError {
    #[error("bad template {pattern:?}: {reason}")]
    BadTemplate { pattern: String, reason: String },
    #[error("no prediction for question {0}")]
    MissingPrediction(usize),
    #[error("line {line}: {reason}")]
    BadRecord { line: usize, reason: String },
    #[error(transparent)]
    Kb(#[from] KbError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Template {
    pub relation: PredicateId,
    pub pattern: String,
}

impl Template {
    /// Requires exactly one `[X]` and one `[Y]`.
    pub fn new(relation: PredicateId, pattern: impl Into<String>) -> Result<Self, ProbeError> {
        let t = Self {
            relation,
            pattern: pattern.into(),
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<(), ProbeError> {
        for slot in [SUBJECT_SLOT, OBJECT_SLOT] {
            let n = self.pattern.matches(slot).count();
            if n != 1 {
                return Err(ProbeError::BadTemplate {
                    pattern: self.pattern.clone(),
                    reason: format!("{slot} occurs {n} times"),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RelationType {
    #[serde(rename = "N1_or_11")]
    N1Or11,
    #[serde(rename = "NM")]
    NM,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fact {
    pub triplet: Triplet,
    pub subject_surface: String,
    pub object_surface: String,
    pub relation_type: RelationType,
    pub in_domain: bool,
}

/// One line of `facts.jsonl`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactRecord {
    pub s: String,
    pub p: String,
    pub o: String,
    pub s_surface: String,
    pub o_surface: String,
}

impl FactRecord {
    pub fn from_fact(f: &Fact) -> Self {
        Self {
            s: f.triplet.subject.to_string(),
            p: f.triplet.predicate.to_string(),
            o: f.triplet.object.to_string(),
            s_surface: f.subject_surface.clone(),
            o_surface: f.object_surface.clone(),
        }
    }

    /// Relation type and domain default to `N1Or11` / out-of-domain until
    /// [`split_questions`] runs.
    pub fn into_fact(self) -> Result<Fact, KbError> {
        Ok(Fact {
            triplet: Triplet::new(
                EntityId::new(self.s)?,
                PredicateId::new(self.p)?,
                EntityId::new(self.o)?,
            ),
            subject_surface: self.s_surface,
            object_surface: self.o_surface,
            relation_type: RelationType::N1Or11,
            in_domain: false,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClozeQuestion {
    /// Index into the fact list.
    pub fact: usize,
    /// Index among the fact's prompts.
    pub prompt_id: usize,
    /// Folded tokens, with one `[MASK]` per gold token.
    pub tokens: Vec<String>,
    pub mask_positions: Vec<usize>,
    pub gold: Vec<String>,
}

impl ClozeQuestion {
    pub fn text(&self) -> String {
        self.tokens.join(" ")
    }
}

/// Substitutes the subject for `[X]` and one mask per object token for `[Y]`.
pub fn instantiate(
    template: &Template,
    fact: &Fact,
    fact_index: usize,
    prompt_id: usize,
) -> Result<ClozeQuestion, ProbeError> {
    template.validate()?;
    let (before, after) = template
        .pattern
        .split_once(OBJECT_SLOT)
        .expect("validated template");
    let gold = token_strings(&fact.object_surface);
    if gold.is_empty() {
        return Err(ProbeError::BadRecord {
            line: fact_index + 1,
            reason: "empty object surface".into(),
        });
    }
    let fill = |s: &str| token_strings(&s.replace(SUBJECT_SLOT, &fact.subject_surface));
    let mut tokens = fill(before);
    let start = tokens.len();
    tokens.extend(std::iter::repeat_n(MASK_TOKEN.to_string(), gold.len()));
    tokens.extend(fill(after));
    Ok(ClozeQuestion {
        fact: fact_index,
        prompt_id,
        tokens,
        mask_positions: (start..start + gold.len()).collect(),
        gold,
    })
}

/// Every template of the fact's relation applied to every fact, in order.
pub fn instantiate_all(
    templates: &[Template],
    facts: &[Fact],
) -> Result<Vec<ClozeQuestion>, ProbeError> {
    let mut by_relation: HashMap<&PredicateId, Vec<&Template>> = HashMap::new();
    for t in templates {
        by_relation.entry(&t.relation).or_default().push(t);
    }
    let mut out = Vec::new();
    for (i, f) in facts.iter().enumerate() {
        for (k, t) in by_relation
            .get(&f.triplet.predicate)
            .into_iter()
            .flatten()
            .enumerate()
        {
            out.push(instantiate(t, f, i, k)?);
        }
    }
    Ok(out)
}

/// Drops questions whose answer tokens occur contiguously in the prompt.
pub fn filter_leakage(
    questions: Vec<ClozeQuestion>,
) -> (Vec<ClozeQuestion>, Vec<ClozeQuestion>) {
    questions.into_iter().partition(|q| !leaks(q))
}

fn leaks(q: &ClozeQuestion) -> bool {
    // mask sentinels never equal a folded answer token
    let n = q.gold.len();
    n > 0 && q.tokens.windows(n).any(|w| w == q.gold.as_slice())
}

/// Sets `in_domain` and `relation_type` for every fact.
pub fn split_questions(facts: &mut [Fact], kb: &KnowledgeBase, pretraining: &BTreeSet<Triplet>) {
    let mut functional: HashMap<PredicateId, bool> = HashMap::new();
    for f in facts {
        f.in_domain = pretraining.contains(&f.triplet);
        let p = &f.triplet.predicate;
        let is_fn = *functional
            .entry(p.clone())
            .or_insert_with(|| kb.is_functional(p.as_str()));
        f.relation_type = if is_fn {
            RelationType::N1Or11
        } else {
            RelationType::NM
        };
    }
}

/// Greedy fill for every question, in question order.
pub fn predict_all(
    state: &ModelState,
    vocab: &Vocabulary,
    questions: &[ClozeQuestion],
) -> Result<Vec<Vec<String>>, ProbeError> {
    questions
        .par_iter()
        .map(|q| {
            let ids: Vec<u32> = q.tokens.iter().map(|t| vocab.id(t)).collect();
            let pred = state.predict_fill(&ids)?;
            Ok(pred.into_iter().map(|id| vocab.token(id).to_string()).collect())
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SplitMetrics {
    pub accuracy: f64,
    pub consistency: f64,
    pub joint: f64,
    pub facts: usize,
    pub questions: usize,
    pub correct: usize,
    pub pairs: usize,
    pub agreeing_pairs: usize,
    pub joint_facts: usize,
}

impl SplitMetrics {
    fn add(&mut self, f: &FactTally) {
        self.facts += 1;
        self.questions += f.questions;
        self.correct += f.correct;
        self.pairs += f.questions * (f.questions - 1) / 2;
        self.agreeing_pairs += f.agreeing_pairs;
        self.joint_facts += usize::from(f.correct == f.questions);
    }

    fn finish(mut self) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        self.accuracy = ratio(self.correct, self.questions);
        self.consistency = ratio(self.agreeing_pairs, self.pairs);
        self.joint = ratio(self.joint_facts, self.facts);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub schema_version: u32,
    pub total: SplitMetrics,
    pub in_domain: SplitMetrics,
    pub out_of_domain: SplitMetrics,
    #[serde(rename = "N1_or_11")]
    pub n1_or_11: SplitMetrics,
    #[serde(rename = "NM")]
    pub nm: SplitMetrics,
    /// Facts that contributed no question.
    pub facts_without_questions: usize,
}

impl MetricsReport {
    pub fn accuracy(&self) -> f64 {
        self.total.accuracy
    }

    pub fn consistency(&self) -> f64 {
        self.total.consistency
    }

    pub fn joint(&self) -> f64 {
        self.total.joint
    }
}

#[derive(Debug, Default)]
struct FactTally {
    questions: usize,
    correct: usize,
    agreeing_pairs: usize,
}

/// Number of unordered pairs of equal items.
pub fn agreeing_pairs<T: Eq + std::hash::Hash>(items: &[T]) -> usize {
    let mut counts: HashMap<&T, usize> = HashMap::new();
    for x in items {
        *counts.entry(x).or_default() += 1;
    }
    counts.values().map(|c| c * (c - 1) / 2).sum()
}

/// Scores `predictions[i]` against `questions[i]`.
pub fn evaluate(
    questions: &[ClozeQuestion],
    predictions: &[Vec<String>],
    facts: &[Fact],
) -> Result<MetricsReport, ProbeError> {
    if predictions.len() < questions.len() {
        return Err(ProbeError::MissingPrediction(predictions.len()));
    }
    let mut per_fact: Vec<Vec<(Vec<String>, bool)>> = vec![Vec::new(); facts.len()];
    for (i, (q, p)) in questions.iter().zip(predictions).enumerate() {
        let slot = per_fact.get_mut(q.fact).ok_or(ProbeError::BadRecord {
            line: i + 1,
            reason: format!("question refers to unknown fact {}", q.fact),
        })?;
        // compared as lowercased token sequences
        let p: Vec<String> = p.iter().map(|t| fold(t)).collect();
        let ok = p.len() == q.gold.len() && p.iter().zip(&q.gold).all(|(a, b)| *a == fold(b));
        slot.push((p, ok));
    }
    let mut report = MetricsReport {
        schema_version: REPORT_SCHEMA_VERSION,
        total: SplitMetrics::default(),
        in_domain: SplitMetrics::default(),
        out_of_domain: SplitMetrics::default(),
        n1_or_11: SplitMetrics::default(),
        nm: SplitMetrics::default(),
        facts_without_questions: 0,
    };
    for (fact, answers) in facts.iter().zip(&per_fact) {
        if answers.is_empty() {
            report.facts_without_questions += 1;
            continue;
        }
        let preds: Vec<&Vec<String>> = answers.iter().map(|(p, _)| p).collect();
        let tally = FactTally {
            questions: answers.len(),
            correct: answers.iter().filter(|(_, ok)| *ok).count(),
            agreeing_pairs: agreeing_pairs(&preds),
        };
        report.total.add(&tally);
        if fact.in_domain {
            report.in_domain.add(&tally);
        } else {
            report.out_of_domain.add(&tally);
        }
        match fact.relation_type {
            RelationType::N1Or11 => report.n1_or_11.add(&tally),
            RelationType::NM => report.nm.add(&tally),
        }
    }
    for s in [
        &mut report.total,
        &mut report.in_domain,
        &mut report.out_of_domain,
        &mut report.n1_or_11,
        &mut report.nm,
    ] {
        *s = s.finish();
    }
    Ok(report)
}

fn read_jsonl<T: serde::de::DeserializeOwned, R: BufRead>(reader: R) -> Result<Vec<T>, ProbeError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| ProbeError::BadRecord {
            line: i + 1,
            reason: e.to_string(),
        })?);
    }
    Ok(out)
}

/// Reads `templates.jsonl`.
pub fn load_templates<R: BufRead>(reader: R) -> Result<Vec<Template>, ProbeError> {
    let templates: Vec<Template> = read_jsonl(reader)?;
    for t in &templates {
        t.validate()?;
    }
    Ok(templates)
}

/// Reads `facts.jsonl`.
pub fn load_facts<R: BufRead>(reader: R) -> Result<Vec<Fact>, ProbeError> {
    read_jsonl::<FactRecord, _>(reader)?
        .into_iter()
        .map(|r| r.into_fact().map_err(ProbeError::from))
        .collect()
}
