use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    AlignError, AlignedSample, AlignedTriplet, Aligner, CandidateCounts, EntityMention, LinkedSpan,
    Paragraph, Span,
};
use crate::kb::{EntityId, KnowledgeBase, PredicateId, Triplet};
use crate::masking::{assign_roles, Annotations, Role};
use crate::text::{pre_tokenize, CharText};

/// One line of `corpus.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub doc_id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entity_spans: Option<Vec<(usize, usize, String)>>,
}

impl CorpusRecord {
    pub fn into_paragraph(self) -> Result<Paragraph, AlignError> {
        let mut p = Paragraph::new(self.doc_id, self.text);
        if let Some(spans) = self.entity_spans {
            let mut links = Vec::with_capacity(spans.len());
            for (start, end, id) in spans {
                let entity = EntityId::new(id).map_err(|e| AlignError::BadParagraph {
                    doc_id: p.doc_id.clone(),
                    reason: e.to_string(),
                })?;
                links.push(LinkedSpan { start, end, entity });
            }
            p.pre_linked = Some(links);
        }
        p.validate()?;
        Ok(p)
    }
}

impl From<&Paragraph> for CorpusRecord {
    fn from(p: &Paragraph) -> Self {
        Self {
            doc_id: p.doc_id.clone(),
            text: p.text.clone(),
            entity_spans: p.pre_linked.as_ref().map(|links| {
                links
                    .iter()
                    .map(|l| (l.start, l.end, l.entity.to_string()))
                    .collect()
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TripletRecord {
    pub s: String,
    pub p: String,
    pub o: String,
    pub s_span: [usize; 2],
    pub p_span: [usize; 2],
    pub o_span: [usize; 2],
    pub edit_distance: u8,
}

/// One line of `samples.jsonl` (the deterministic dataset).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub doc_id: String,
    pub text: String,
    pub entities: Vec<(usize, usize, String)>,
    pub triplets: Vec<TripletRecord>,
}

/// One line of `ssm.jsonl` (paragraphs with linked entities).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SsmRecord {
    pub doc_id: String,
    pub text: String,
    pub entities: Vec<(usize, usize, String)>,
}

fn entity_tuples(mentions: &[EntityMention]) -> Vec<(usize, usize, String)> {
    mentions
        .iter()
        .map(|m| (m.span.start, m.span.end, m.entity.to_string()))
        .collect()
}

impl From<&AlignedSample> for SampleRecord {
    fn from(s: &AlignedSample) -> Self {
        Self {
            doc_id: s.paragraph.doc_id.clone(),
            text: s.paragraph.text.clone(),
            entities: entity_tuples(&s.entity_spans),
            triplets: s
                .aligned
                .iter()
                .map(|t| TripletRecord {
                    s: t.triplet.subject.to_string(),
                    p: t.triplet.predicate.to_string(),
                    o: t.triplet.object.to_string(),
                    s_span: [t.subject_span.start, t.subject_span.end],
                    p_span: [t.predicate_span.start, t.predicate_span.end],
                    o_span: [t.object_span.start, t.object_span.end],
                    edit_distance: t.edit_distance,
                })
                .collect(),
        }
    }
}

impl From<&AlignedSample> for SsmRecord {
    fn from(s: &AlignedSample) -> Self {
        Self {
            doc_id: s.paragraph.doc_id.clone(),
            text: s.paragraph.text.clone(),
            entities: entity_tuples(&s.entity_spans),
        }
    }
}

fn checked_span(text: &CharText, doc_id: &str, [s, e]: [usize; 2]) -> Result<Span, AlignError> {
    if s >= e || e > text.len() {
        return Err(AlignError::BadParagraph {
            doc_id: doc_id.to_string(),
            reason: format!("span [{s}, {e}) out of range"),
        });
    }
    Ok(Span::of(text, s, e))
}

fn mentions_from(
    text: &CharText,
    doc_id: &str,
    entities: &[(usize, usize, String)],
) -> Result<Vec<EntityMention>, AlignError> {
    entities
        .iter()
        .map(|(s, e, id)| {
            Ok(EntityMention {
                span: checked_span(text, doc_id, [*s, *e])?,
                entity: EntityId::new(id.as_str()).map_err(|err| AlignError::BadParagraph {
                    doc_id: doc_id.to_string(),
                    reason: err.to_string(),
                })?,
            })
        })
        .collect()
}

impl SampleRecord {
    /// Rebuilds the aligned sample; surfaces are re-derived from the text.
    pub fn into_sample(self) -> Result<AlignedSample, AlignError> {
        let text = CharText::new(&self.text);
        let doc = self.doc_id.as_str();
        let entity_spans = mentions_from(&text, doc, &self.entities)?;
        let bad = |e: crate::kb::KbError| AlignError::BadParagraph {
            doc_id: doc.to_string(),
            reason: e.to_string(),
        };
        let mut aligned = Vec::with_capacity(self.triplets.len());
        for t in &self.triplets {
            aligned.push(AlignedTriplet {
                triplet: Triplet::new(
                    EntityId::new(t.s.as_str()).map_err(bad)?,
                    PredicateId::new(t.p.as_str()).map_err(bad)?,
                    EntityId::new(t.o.as_str()).map_err(bad)?,
                ),
                subject_span: checked_span(&text, doc, t.s_span)?,
                predicate_span: checked_span(&text, doc, t.p_span)?,
                object_span: checked_span(&text, doc, t.o_span)?,
                deterministic: true,
                edit_distance: t.edit_distance,
            });
        }
        Ok(AlignedSample {
            paragraph: Paragraph::new(self.doc_id, self.text),
            entity_spans,
            aligned,
            counts: CandidateCounts::default(),
        })
    }
}

impl SsmRecord {
    pub fn into_parts(self) -> Result<(Paragraph, Vec<EntityMention>), AlignError> {
        let text = CharText::new(&self.text);
        let mentions = mentions_from(&text, &self.doc_id, &self.entities)?;
        Ok((Paragraph::new(self.doc_id, self.text), mentions))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AlignOptions {
    pub threads: usize,
    /// Paragraphs aligned per parallel batch; output order is unaffected.
    pub chunk_size: usize,
}

impl Default for AlignOptions {
    fn default() -> Self {
        Self {
            threads: 1,
            chunk_size: 2048,
        }
    }
}

/// Run-level counters. `paragraphs_read = deterministic_paragraphs +
/// no_deterministic_triplet + invalid_paragraphs`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildCounters {
    pub paragraphs_read: u64,
    pub invalid_paragraphs: u64,
    pub deterministic_paragraphs: u64,
    pub no_deterministic_triplet: u64,
    pub ssm_paragraphs: u64,
    pub aligned_triplets: u64,
    pub candidates: CandidateCounts,
}

impl BuildCounters {
    pub fn nondeterministic_fraction(&self) -> f64 {
        if self.candidates.candidates == 0 {
            0.0
        } else {
            self.candidates.nondeterministic as f64 / self.candidates.candidates as f64
        }
    }
}

/// In-memory alignment output.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub deterministic: Vec<AlignedSample>,
    pub salient: Vec<(Paragraph, Vec<EntityMention>)>,
    pub counters: BuildCounters,
}

/// Aligns a corpus, invoking `sink` once per valid paragraph in input order.
/// Invalid paragraphs are logged, counted and skipped.
pub fn align_corpus<I, F>(
    corpus: I,
    kb: &KnowledgeBase,
    opts: &AlignOptions,
    mut sink: F,
) -> BuildCounters
where
    I: IntoIterator<Item = Result<Paragraph, AlignError>>,
    F: FnMut(&AlignedSample),
{
    let aligner = Aligner::new(kb);
    let pool = (opts.threads > 1).then(|| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(opts.threads)
            .build()
            .expect("failed to build alignment thread pool")
    });
    let mut counters = BuildCounters::default();
    let mut iter = corpus.into_iter().peekable();
    let chunk_size = opts.chunk_size.max(1);
    let mut chunk: Vec<Result<Paragraph, AlignError>> = Vec::with_capacity(chunk_size);

    while iter.peek().is_some() {
        chunk.clear();
        chunk.extend(iter.by_ref().take(chunk_size));
        let run = |p: &Result<Paragraph, AlignError>| {
            p.as_ref()
                .ok()
                .map(|p| aligner.align_paragraph(p))
        };
        let results: Vec<Option<AlignedSample>> = match &pool {
            Some(pool) => pool.install(|| chunk.par_iter().map(run).collect()),
            None => chunk.iter().map(run).collect(),
        };
        for (input, out) in chunk.iter().zip(results) {
            counters.paragraphs_read += 1;
            let Some(sample) = out else {
                if let Err(e) = input {
                    log::warn!("skipping paragraph: {e}");
                }
                counters.invalid_paragraphs += 1;
                continue;
            };
            counters.candidates += sample.counts;
            counters.aligned_triplets += sample.aligned.len() as u64;
            if sample.aligned.is_empty() {
                counters.no_deterministic_triplet += 1;
            } else {
                counters.deterministic_paragraphs += 1;
            }
            if !sample.entity_spans.is_empty() {
                counters.ssm_paragraphs += 1;
            }
            sink(&sample);
        }
    }
    counters
}

/// Runs alignment and collects both output datasets in input order.
pub fn build_dataset<I>(corpus: I, kb: &KnowledgeBase, opts: &AlignOptions) -> Dataset
where
    I: IntoIterator<Item = Result<Paragraph, AlignError>>,
{
    let mut out = Dataset::default();
    out.counters = align_corpus(corpus, kb, opts, |s| {
        if !s.entity_spans.is_empty() {
            out.salient.push((s.paragraph.clone(), s.entity_spans.clone()));
        }
        if !s.aligned.is_empty() {
            out.deterministic.push(s.clone());
        }
    });
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub paragraph_count: u64,
    pub sample_count: u64,
    pub avg_tokens_per_paragraph: f64,
    /// Tokens in the union of all subject and predicate clues of a sample.
    pub avg_clue_tokens: f64,
    pub avg_object_tokens: f64,
    pub nondeterministic_fraction: f64,
}

impl std::fmt::Display for DatasetStats {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "{:<34}{:>12}", "# Paragraphs", self.paragraph_count)?;
        writeln!(f, "{:<34}{:>12}", "# Samples", self.sample_count)?;
        writeln!(f, "{:<34}{:>12.2}", "Avg. tokens per paragraph", self.avg_tokens_per_paragraph)?;
        writeln!(f, "{:<34}{:>12.2}", "Avg. # tokens per S ∪ P", self.avg_clue_tokens)?;
        writeln!(f, "{:<34}{:>12.2}", "Avg. # tokens per O", self.avg_object_tokens)?;
        write!(
            f,
            "{:<34}{:>11.2}%",
            "Non-deterministic triplets",
            100.0 * self.nondeterministic_fraction
        )
    }
}

/// Summary statistics over the deterministic dataset. A sample is one
/// object span together with all of its deterministic clues.
pub fn compute_stats(
    samples: &[AlignedSample],
    candidates: &CandidateCounts,
) -> Result<DatasetStats, AlignError> {
    let mut paragraphs = 0u64;
    let mut para_tokens = 0usize;
    let mut groups = 0u64;
    let mut clue_tokens = 0usize;
    let mut object_tokens = 0usize;
    for s in samples {
        let object_groups = s.object_groups();
        if object_groups.is_empty() {
            continue;
        }
        paragraphs += 1;
        let tokens = pre_tokenize(&s.paragraph.text);
        para_tokens += tokens.len();
        for g in &object_groups {
            let roles = assign_roles(&tokens, &Annotations::for_group(s, g));
            groups += 1;
            object_tokens += roles.iter().filter(|r| **r == Role::Object).count();
            clue_tokens += roles.iter().filter(|r| r.is_clue()).count();
        }
    }
    if groups == 0 {
        return Err(AlignError::EmptyDataset);
    }
    let nondeterministic_fraction = if candidates.candidates == 0 {
        0.0
    } else {
        candidates.nondeterministic as f64 / candidates.candidates as f64
    };
    Ok(DatasetStats {
        paragraph_count: paragraphs,
        sample_count: groups,
        avg_tokens_per_paragraph: para_tokens as f64 / paragraphs as f64,
        avg_clue_tokens: clue_tokens as f64 / groups as f64,
        avg_object_tokens: object_tokens as f64 / groups as f64,
        nondeterministic_fraction,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::KbBuilder;

    fn kb() -> KnowledgeBase {
        KbBuilder::new()
            .entity("Q1", "War Horse", &[])
            .unwrap()
            .entity("Q2", "Steven Spielberg", &[])
            .unwrap()
            .entity("Q3", "Jaws", &[])
            .unwrap()
            .entity("Q5", "John Williams", &[])
            .unwrap()
            .predicate("P57", &["directed by"])
            .unwrap()
            .predicate("P86", &["composed by"])
            .unwrap()
            .predicate("P58", &["director of"])
            .unwrap()
            .triplet("Q1", "P57", "Q2")
            .unwrap()
            .triplet("Q3", "P86", "Q5")
            .unwrap()
            .triplet("Q2", "P58", "Q1")
            .unwrap()
            .triplet("Q2", "P58", "Q3")
            .unwrap()
            .build()
            .unwrap()
    }

    #[test]
    fn empty_corpus() {
        let d = build_dataset(Vec::new(), &kb(), &AlignOptions::default());
        assert!(d.deterministic.is_empty() && d.salient.is_empty());
        assert_eq!(d.counters, BuildCounters::default());
    }

    #[test]
    fn nondeterministic_only_goes_to_ssm() {
        let corpus = vec![Ok(Paragraph::new(
            "p",
            "Steven Spielberg, director of War Horse.",
        ))];
        let d = build_dataset(corpus, &kb(), &AlignOptions::default());
        assert!(d.deterministic.is_empty());
        assert_eq!(d.salient.len(), 1);
        assert_eq!(d.counters.candidates.nondeterministic, 1);
    }

    #[test]
    fn bad_paragraph_is_skipped_not_fatal() {
        let corpus = vec![
            Err(AlignError::BadRecord {
                line: 1,
                reason: "x".into(),
            }),
            Ok(Paragraph::new("ok", "War Horse was directed by Steven Spielberg.")),
        ];
        let d = build_dataset(corpus, &kb(), &AlignOptions::default());
        assert_eq!(d.counters.invalid_paragraphs, 1);
        assert_eq!(d.deterministic.len(), 1);
        assert_eq!(d.counters.paragraphs_read, 2);
    }

    #[test]
    fn record_round_trip() {
        let d = build_dataset(
            vec![Ok(Paragraph::new("ok", "War Horse was directed by Steven Spielberg."))],
            &kb(),
            &AlignOptions::default(),
        );
        let s = &d.deterministic[0];
        let rec = SampleRecord::from(s);
        let back = rec.into_sample().unwrap();
        assert_eq!(back.aligned, s.aligned);
        assert_eq!(back.entity_spans, s.entity_spans);
    }

    #[test]
    fn stats_object_token_average() {
        let d = build_dataset(
            vec![
                Ok(Paragraph::new("a", "War Horse was directed by Steven Spielberg.")),
                Ok(Paragraph::new("b", "Jaws , composed by John Williams .")),
            ],
            &kb(),
            &AlignOptions::default(),
        );
        let stats = compute_stats(&d.deterministic, &d.counters.candidates).unwrap();
        assert_eq!(stats.sample_count, 2);
        assert_eq!(stats.avg_object_tokens, 2.0);
        // S ∪ P: "war horse" + "directed by", "jaws" + "composed by"
        assert_eq!(stats.avg_clue_tokens, 3.5);
        assert_eq!(stats.avg_tokens_per_paragraph, 7.5);
    }

    #[test]
    fn stats_need_samples() {
        assert_eq!(
            compute_stats(&[], &CandidateCounts::default()),
            Err(AlignError::EmptyDataset)
        );
    }
}
