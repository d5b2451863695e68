//! Text/knowledge-base alignment.
//!
//! For each paragraph: link entity mentions, enumerate ordered mention pairs,
//! look up every predicate connecting the pair in the knowledge base, keep the
//! triplets whose `(subject, predicate)` has a unique object and whose predicate
//! can be located in the text within one edit. Paragraphs with at least one such
//! triplet form the deterministic dataset; every paragraph with a linked entity
//! is kept for salient span masking.

mod dataset;
mod link;
mod predicate;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kb::{EntityId, KnowledgeBase, PredicateId, Triplet};
use crate::text::CharText;

pub use dataset::{
    align_corpus, build_dataset, compute_stats, AlignOptions, BuildCounters, CorpusRecord, Dataset,
    DatasetStats, SampleRecord, SsmRecord, TripletRecord,
};
pub use link::Gazetteer;
pub use predicate::{within_one_edit, PredicateMatcher, TokenBounds, WindowMatch};

#[derive(Debug, Error, PartialEq)]
pub enum AlignError {
    #[error("line {line}: invalid corpus record: {reason}")]
    BadRecord { line: usize, reason: String },
    #[error("paragraph {doc_id:?}: {reason}")]
    BadParagraph { doc_id: String, reason: String },
    #[error("dataset has no samples")]
    EmptyDataset,
}

/// A pre-linked entity mention given as char offsets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinkedSpan {
    pub start: usize,
    pub end: usize,
    pub entity: EntityId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Paragraph {
    pub doc_id: String,
    pub text: String,
    /// Externally provided alignments; when present the linker is bypassed.
    pub pre_linked: Option<Vec<LinkedSpan>>,
}

impl Paragraph {
    pub fn new(doc_id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            doc_id: doc_id.into(),
            text: text.into(),
            pre_linked: None,
        }
    }

    pub fn with_links(mut self, links: Vec<LinkedSpan>) -> Self {
        self.pre_linked = Some(links);
        self
    }

    /// Checks pre-linked spans: in range, non-empty, non-overlapping.
    pub fn validate(&self) -> Result<(), AlignError> {
        let Some(links) = &self.pre_linked else {
            return Ok(());
        };
        let len = self.text.chars().count();
        let bad = |reason: String| AlignError::BadParagraph {
            doc_id: self.doc_id.clone(),
            reason,
        };
        let mut sorted: Vec<_> = links.iter().map(|l| (l.start, l.end)).collect();
        for &(s, e) in &sorted {
            if s >= e || e > len {
                return Err(bad(format!("span [{s}, {e}) out of range for text of {len} chars")));
            }
        }
        sorted.sort_unstable();
        for w in sorted.windows(2) {
            if w[1].0 < w[0].1 {
                return Err(bad(format!(
                    "spans [{}, {}) and [{}, {}) overlap",
                    w[0].0, w[0].1, w[1].0, w[1].1
                )));
            }
        }
        Ok(())
    }
}

/// Char range into a paragraph with its surface text.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub surface: String,
}

impl Span {
    fn of(text: &CharText, start: usize, end: usize) -> Self {
        Self {
            start,
            end,
            surface: text.slice(start..end),
        }
    }

    pub fn range(&self) -> (usize, usize) {
        (self.start, self.end)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntityMention {
    pub span: Span,
    pub entity: EntityId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredicateMatch {
    pub span: Span,
    pub distance: u8,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlignedTriplet {
    pub triplet: Triplet,
    pub subject_span: Span,
    pub predicate_span: Span,
    pub object_span: Span,
    pub deterministic: bool,
    pub edit_distance: u8,
}

/// Per-paragraph candidate bookkeeping. A candidate is a distinct KB triplet
/// whose subject and object are both linked in the paragraph.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateCounts {
    pub candidates: u64,
    pub nondeterministic: u64,
    pub unmatched_predicate: u64,
}

impl std::ops::AddAssign for CandidateCounts {
    fn add_assign(&mut self, rhs: Self) {
        self.candidates += rhs.candidates;
        self.nondeterministic += rhs.nondeterministic;
        self.unmatched_predicate += rhs.unmatched_predicate;
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlignedSample {
    pub paragraph: Paragraph,
    pub entity_spans: Vec<EntityMention>,
    /// Only deterministic triplets are kept here.
    pub aligned: Vec<AlignedTriplet>,
    pub counts: CandidateCounts,
}

/// Aligned triplets sharing one object span. This is the unit that becomes
/// one masked training sample; all of its subjects and predicates are clues.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObjectGroup<'a> {
    pub object_span: &'a Span,
    pub triplets: Vec<&'a AlignedTriplet>,
}

impl AlignedSample {
    /// Groups aligned triplets by object span, in order of first appearance.
    pub fn object_groups(&self) -> Vec<ObjectGroup<'_>> {
        let mut groups: Vec<ObjectGroup<'_>> = Vec::new();
        for t in &self.aligned {
            match groups.iter_mut().find(|g| *g.object_span == t.object_span) {
                Some(g) => g.triplets.push(t),
                None => groups.push(ObjectGroup {
                    object_span: &t.object_span,
                    triplets: vec![t],
                }),
            }
        }
        groups
    }
}

/// Shared read-only alignment state built once per knowledge base.
#[derive(Debug, Clone)]
pub struct Aligner<'kb> {
    kb: &'kb KnowledgeBase,
    gazetteer: Gazetteer,
    matcher: PredicateMatcher,
}

impl<'kb> Aligner<'kb> {
    pub fn new(kb: &'kb KnowledgeBase) -> Self {
        Self {
            kb,
            gazetteer: Gazetteer::from_kb(kb),
            matcher: PredicateMatcher::from_kb(kb),
        }
    }

    pub fn kb(&self) -> &'kb KnowledgeBase {
        self.kb
    }

    /// Pre-linked spans are returned verbatim (sorted by position); otherwise
    /// aliases are matched with the dictionary linker.
    pub fn link_entities(&self, paragraph: &Paragraph) -> Vec<EntityMention> {
        self.link_with(paragraph, &CharText::new(&paragraph.text))
    }

    fn link_with(&self, paragraph: &Paragraph, text: &CharText) -> Vec<EntityMention> {
        match &paragraph.pre_linked {
            Some(links) => {
                let mut out: Vec<_> = links
                    .iter()
                    .map(|l| EntityMention {
                        span: Span::of(text, l.start, l.end),
                        entity: l.entity.clone(),
                    })
                    .collect();
                out.sort_by_key(|m| (m.span.start, m.span.end));
                out
            }
            None => self
                .gazetteer
                .find_all(text)
                .into_iter()
                .map(|(s, e, id)| EntityMention {
                    span: Span::of(text, s, e),
                    entity: id,
                })
                .collect(),
        }
    }

    /// Best span within edit distance 1 of an alias of `predicate`.
    pub fn match_predicate(&self, text: &str, predicate: &str) -> Option<PredicateMatch> {
        let chars = CharText::new(text);
        let bounds = TokenBounds::new(text, chars.len());
        self.match_with(&chars, &bounds, predicate)
    }

    fn match_with(
        &self,
        text: &CharText,
        bounds: &TokenBounds,
        predicate: &str,
    ) -> Option<PredicateMatch> {
        self.matcher
            .best_match(text, bounds, predicate)
            .map(|m| PredicateMatch {
                span: Span::of(text, m.start, m.end),
                distance: m.distance,
            })
    }

    pub fn align_paragraph(&self, paragraph: &Paragraph) -> AlignedSample {
        let text = CharText::new(&paragraph.text);
        let mentions = self.link_with(paragraph, &text);
        let mut bounds: Option<TokenBounds> = None;
        let mut matched: Vec<(PredicateId, Option<PredicateMatch>)> = Vec::new();
        let mut seen: HashSet<(&EntityId, &PredicateId, &EntityId)> = HashSet::new();
        let mut counts = CandidateCounts::default();
        let mut aligned = Vec::new();

        for (i, subj) in mentions.iter().enumerate() {
            for (j, obj) in mentions.iter().enumerate() {
                if i == j || subj.span.range() == obj.span.range() {
                    continue;
                }
                for r in self.kb.predicates_between(subj.entity.as_str(), obj.entity.as_str()) {
                    if !seen.insert((&subj.entity, r, &obj.entity)) {
                        continue;
                    }
                    counts.candidates += 1;
                    if !self.kb.is_deterministic(subj.entity.as_str(), r.as_str()) {
                        counts.nondeterministic += 1;
                        continue;
                    }
                    let pm = match matched.iter().find(|(p, _)| p == r) {
                        Some((_, m)) => m.clone(),
                        None => {
                            let b = bounds
                                .get_or_insert_with(|| TokenBounds::new(&paragraph.text, text.len()));
                            let m = self.match_with(&text, b, r.as_str());
                            matched.push((r.clone(), m.clone()));
                            m
                        }
                    };
                    let Some(pm) = pm else {
                        counts.unmatched_predicate += 1;
                        continue;
                    };
                    aligned.push(AlignedTriplet {
                        triplet: Triplet::new(subj.entity.clone(), r.clone(), obj.entity.clone()),
                        subject_span: subj.span.clone(),
                        predicate_span: pm.span,
                        object_span: obj.span.clone(),
                        deterministic: true,
                        edit_distance: pm.distance,
                    });
                }
            }
        }

        AlignedSample {
            paragraph: paragraph.clone(),
            entity_spans: mentions,
            aligned,
            counts,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::KbBuilder;

    fn film_kb() -> KnowledgeBase {
        KbBuilder::new()
            .entity("Q1", "War Horse", &[])
            .unwrap()
            .entity("Q2", "Steven Spielberg", &[])
            .unwrap()
            .entity("Q3", "Jaws", &[])
            .unwrap()
            .entity("Q4", "American", &[])
            .unwrap()
            .predicate("P57", &["directed by"])
            .unwrap()
            .predicate("P58", &["director of", "directed"])
            .unwrap()
            .triplet("Q1", "P57", "Q2")
            .unwrap()
            .triplet("Q2", "P58", "Q1")
            .unwrap()
            .triplet("Q2", "P58", "Q3")
            .unwrap()
            .build()
            .unwrap()
    }

    #[test]
    fn links_single_alias() {
        let kb = film_kb();
        let a = Aligner::new(&kb);
        let m = a.link_entities(&Paragraph::new("d", "War Horse is a film"));
        assert_eq!(m.len(), 1);
        assert_eq!((m[0].span.start, m[0].span.end), (0, 9));
        assert_eq!(m[0].entity.as_str(), "Q1");
    }

    #[test]
    fn longest_alias_wins() {
        let kb = KbBuilder::new()
            .entity("Q3", "New York", &[])
            .unwrap()
            .entity("Q4", "New York University", &[])
            .unwrap()
            .build()
            .unwrap();
        let a = Aligner::new(&kb);
        let m = a.link_entities(&Paragraph::new("d", "New York University is in New York."));
        let got: Vec<_> = m
            .iter()
            .map(|m| (m.span.start, m.span.end, m.entity.as_str()))
            .collect();
        assert_eq!(got, [(0, 19, "Q4"), (26, 34, "Q3")]);
    }

    #[test]
    fn linker_respects_word_boundaries_and_case() {
        let kb = KbBuilder::new().entity("Q1", "York", &[]).unwrap().build().unwrap();
        let a = Aligner::new(&kb);
        assert!(a.link_entities(&Paragraph::new("d", "Yorkshire pudding")).is_empty());
        let m = a.link_entities(&Paragraph::new("d", "in YORK, today"));
        assert_eq!((m[0].span.start, m[0].span.end), (3, 7));
        assert_eq!(m[0].span.surface, "YORK");
    }

    #[test]
    fn pre_linked_passthrough() {
        let kb = film_kb();
        let a = Aligner::new(&kb);
        let p = Paragraph::new("d", "War Horse is a film by Steven Spielberg").with_links(vec![
            LinkedSpan {
                start: 0,
                end: 9,
                entity: EntityId::new("Q1").unwrap(),
            },
        ]);
        let m = a.link_entities(&p);
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].entity.as_str(), "Q1");
    }

    #[test]
    fn predicate_exact_typo_and_miss() {
        let kb = film_kb();
        let a = Aligner::new(&kb);
        let exact = a.match_predicate("The film is directed by him", "P57").unwrap();
        assert_eq!((exact.span.surface.as_str(), exact.distance), ("directed by", 0));
        let typo = a.match_predicate("The film is directd by him", "P57").unwrap();
        assert_eq!((typo.span.surface.as_str(), typo.distance), ("directd by", 1));
        assert!(a.match_predicate("The film is starring him", "P57").is_none());
    }

    #[test]
    fn director_alignment() {
        let kb = film_kb();
        let a = Aligner::new(&kb);
        let s = a.align_paragraph(&Paragraph::new(
            "film",
            "War Horse, a 2011 drama, was directed by Steven Spielberg",
        ));
        assert_eq!(s.aligned.len(), 1);
        let t = &s.aligned[0];
        assert_eq!(t.object_span.surface, "Steven Spielberg");
        assert_eq!(t.subject_span.surface, "War Horse");
        assert_eq!(t.predicate_span.surface, "directed by");
        assert!(t.deterministic);
        // (Spielberg, director of, War Horse) was a candidate but not unique
        assert_eq!(s.counts.candidates, 2);
        assert_eq!(s.counts.nondeterministic, 1);
    }

    #[test]
    fn single_entity_has_no_pairs() {
        let kb = film_kb();
        let a = Aligner::new(&kb);
        let s = a.align_paragraph(&Paragraph::new("d", "War Horse is a film"));
        assert!(s.aligned.is_empty());
        assert_eq!(s.counts, CandidateCounts::default());
    }

    #[test]
    fn unmatched_predicate_is_gated() {
        let kb = film_kb();
        let a = Aligner::new(&kb);
        let s = a.align_paragraph(&Paragraph::new("d", "War Horse starring Steven Spielberg"));
        assert!(s.aligned.is_empty());
        assert_eq!(s.counts.unmatched_predicate, 1);
    }

    #[test]
    fn overlapping_pre_links_rejected() {
        let p = Paragraph::new("d", "abcdef").with_links(vec![
            LinkedSpan {
                start: 0,
                end: 3,
                entity: EntityId::new("Q1").unwrap(),
            },
            LinkedSpan {
                start: 2,
                end: 4,
                entity: EntityId::new("Q2").unwrap(),
            },
        ]);
        assert!(p.validate().is_err());
    }
}
