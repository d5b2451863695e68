//! Brute-force reference implementations shared by the integration tests.
//! Nothing here calls the code under test except for plain data types.

#![allow(dead_code)]

use std::collections::{BTreeSet, HashSet};

use detmask::align::{AlignedSample, AlignedTriplet, CandidateCounts, EntityMention, Paragraph, Span};
use detmask::kb::{EntityId, KnowledgeBase, PredicateId, Triplet};

fn fold(c: char) -> char {
    c.to_lowercase().next().unwrap_or(c)
}

fn word(c: char) -> bool {
    c.is_alphanumeric()
}

/// Full Levenshtein distance.
pub fn levenshtein(a: &[char], b: &[char]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    for (i, ca) in a.iter().enumerate() {
        let mut cur = vec![i + 1; b.len() + 1];
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        prev = cur;
    }
    prev[b.len()]
}

/// `(start, end)` of every token: maximal alphanumeric runs, and every other
/// non-space char on its own.
pub fn token_ranges(chars: &[char]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if chars[i].is_whitespace() {
            i += 1;
        } else if word(chars[i]) {
            let s = i;
            while i < chars.len() && word(chars[i]) {
                i += 1;
            }
            out.push((s, i));
        } else {
            out.push((i, i + 1));
            i += 1;
        }
    }
    out
}

fn span(chars: &[char], start: usize, end: usize) -> Span {
    Span {
        start,
        end,
        surface: chars[start..end].iter().collect(),
    }
}

fn boundary(chars: &[char], i: usize) -> bool {
    i == 0 || i >= chars.len() || !word(chars[i - 1]) || !word(chars[i])
}

/// Longest alias match scanning left to right; ties go to the smallest id.
pub fn naive_link(kb: &KnowledgeBase, paragraph: &Paragraph) -> Vec<EntityMention> {
    let chars: Vec<char> = paragraph.text.chars().collect();
    if let Some(links) = &paragraph.pre_linked {
        let mut out: Vec<EntityMention> = links
            .iter()
            .map(|l| EntityMention {
                span: span(&chars, l.start, l.end),
                entity: l.entity.clone(),
            })
            .collect();
        out.sort_by_key(|m| (m.span.start, m.span.end));
        return out;
    }
    let folded: Vec<char> = chars.iter().copied().map(fold).collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let mut best: Option<(usize, &EntityId)> = None;
        if boundary(&chars, i) {
            for (id, aliases) in kb.entity_aliases().iter() {
                for alias in aliases {
                    let a: Vec<char> = alias.chars().map(fold).collect();
                    let end = i + a.len();
                    if a.is_empty() || end > chars.len() || folded[i..end] != a[..] {
                        continue;
                    }
                    if !boundary(&chars, end) {
                        continue;
                    }
                    let better = match best {
                        None => true,
                        Some((e, b)) => end > e || (end == e && id < b),
                    };
                    if better {
                        best = Some((end, id));
                    }
                }
            }
        }
        match best {
            Some((end, id)) => {
                out.push(EntityMention {
                    span: span(&chars, i, end),
                    entity: id.clone(),
                });
                i = end;
            }
            None => i += 1,
        }
    }
    out
}

/// Best token-aligned window within one edit of any alias of `predicate`,
/// ordered by (distance, start, length). Every window is scored.
pub fn naive_match_predicate(kb: &KnowledgeBase, text: &str, predicate: &str) -> Option<(Span, u8)> {
    let chars: Vec<char> = text.chars().collect();
    let folded: Vec<char> = chars.iter().copied().map(fold).collect();
    let toks = token_ranges(&chars);
    let aliases = kb.predicate_aliases().get(predicate)?;
    let mut best: Option<(usize, usize, usize)> = None;
    for alias in aliases {
        let a: Vec<char> = alias.chars().map(fold).collect();
        for &(s, _) in &toks {
            for &(_, e) in &toks {
                if e <= s {
                    continue;
                }
                let d = levenshtein(&folded[s..e], &a);
                if d > 1 {
                    continue;
                }
                let key = (d, s, e - s);
                if best.is_none_or(|b| key < b) {
                    best = Some(key);
                }
            }
        }
    }
    best.map(|(d, s, len)| (span(&chars, s, s + len), d as u8))
}

/// Predicates linking `s` to `o`, by linear scan, in id order.
pub fn linear_predicates(kb: &KnowledgeBase, s: &EntityId, o: &EntityId) -> BTreeSet<PredicateId> {
    kb.triplets()
        .iter()
        .filter(|t| &t.subject == s && &t.object == o)
        .map(|t| t.predicate.clone())
        .collect()
}

pub fn linear_objects(kb: &KnowledgeBase, s: &str, p: &str) -> BTreeSet<EntityId> {
    kb.triplets()
        .iter()
        .filter(|t| t.subject.as_str() == s && t.predicate.as_str() == p)
        .map(|t| t.object.clone())
        .collect()
}

/// Reference alignment of one paragraph.
pub fn naive_align(kb: &KnowledgeBase, paragraph: &Paragraph) -> AlignedSample {
    let mentions = naive_link(kb, paragraph);
    let mut seen = HashSet::new();
    let mut counts = CandidateCounts::default();
    let mut aligned = Vec::new();
    for (i, subj) in mentions.iter().enumerate() {
        for (j, obj) in mentions.iter().enumerate() {
            if i == j || subj.span.range() == obj.span.range() {
                continue;
            }
            for p in linear_predicates(kb, &subj.entity, &obj.entity) {
                let t = Triplet::new(subj.entity.clone(), p.clone(), obj.entity.clone());
                if !seen.insert(t.clone()) {
                    continue;
                }
                counts.candidates += 1;
                if linear_objects(kb, subj.entity.as_str(), p.as_str()).len() != 1 {
                    counts.nondeterministic += 1;
                    continue;
                }
                let Some((pspan, d)) = naive_match_predicate(kb, &paragraph.text, p.as_str()) else {
                    counts.unmatched_predicate += 1;
                    continue;
                };
                aligned.push(AlignedTriplet {
                    triplet: t,
                    subject_span: subj.span.clone(),
                    predicate_span: pspan,
                    object_span: obj.span.clone(),
                    deterministic: true,
                    edit_distance: d,
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

/// Reference deterministic dataset: aligned samples with at least one triplet.
pub fn naive_dataset(kb: &KnowledgeBase, corpus: &[Paragraph]) -> Vec<AlignedSample> {
    corpus
        .iter()
        .map(|p| naive_align(kb, p))
        .filter(|s| !s.aligned.is_empty())
        .collect()
}

/// Agreeing unordered pairs by enumerating every pair.
pub fn brute_agreeing_pairs<T: PartialEq>(items: &[T]) -> usize {
    let mut n = 0;
    for i in 0..items.len() {
        for j in i + 1..items.len() {
            n += usize::from(items[i] == items[j]);
        }
    }
    n
}

/// Path to the built `detmask` binary.
pub fn bin() -> std::process::Command {
    std::process::Command::new(env!("CARGO_BIN_EXE_detmask"))
}

/// A random tokenized sample: arbitrary roles, word breaks and disjoint
/// entity ranges over 1..=40 tokens.
pub fn random_tokenized<R: rand::Rng>(rng: &mut R, doc: usize) -> detmask::masking::TokenizedSample {
    use detmask::masking::Role;
    const ROLES: [Role; 5] = [
        Role::Other,
        Role::SubjectClue,
        Role::PredicateClue,
        Role::Object,
        Role::ForeignClue,
    ];
    let n = rng.random_range(1..=40);
    let weights = [rng.random_range(1..6), rng.random_range(0..3), rng.random_range(0..3), rng.random_range(0..3), rng.random_range(0..2)];
    let total: u32 = weights.iter().sum();
    let roles = (0..n)
        .map(|_| {
            let mut x = rng.random_range(0..total);
            let mut k = 0;
            while x >= weights[k] {
                x -= weights[k];
                k += 1;
            }
            ROLES[k]
        })
        .collect();
    let mut word_starts: Vec<bool> = (0..n).map(|_| rng.random_bool(0.7)).collect();
    word_starts[0] = true;
    let mut entity_ranges = Vec::new();
    let mut i = 0;
    while i < n {
        if rng.random_bool(0.2) {
            let end = (i + rng.random_range(1..4)).min(n);
            entity_ranges.push(i..end);
            i = end;
        } else {
            i += 1;
        }
    }
    detmask::masking::TokenizedSample {
        doc_id: format!("doc{doc}"),
        tokens: (0..n).map(|_| rng.random_range(3..60)).collect(),
        token_spans: (0..n).map(|k| (2 * k, 2 * k + 1)).collect(),
        roles,
        word_starts,
        entity_ranges,
    }
}

/// Checks one masked sample against its scheme contract. Returns a reason
/// on violation.
pub fn check_scheme_contract(
    sample: &detmask::masking::TokenizedSample,
    scheme: detmask::masking::MaskScheme,
    m: &detmask::masking::MaskedSample,
) -> Result<(), String> {
    use detmask::masking::{MaskScheme, Role, MASK_ID};
    check_masking(sample, m)?;
    let object: Vec<usize> = (0..sample.len()).filter(|&i| sample.roles[i] == Role::Object).collect();
    let pos = &m.mask_positions;
    match scheme {
        MaskScheme::RandomToken => {
            if pos.len() != object.len() {
                return Err(format!("random_token masked {} of {} object tokens", pos.len(), object.len()));
            }
        }
        MaskScheme::WholeWord => {
            let words = word_ranges(&sample.word_starts);
            let want = words.iter().filter(|w| (*w).clone().any(|i| sample.roles[i] == Role::Object)).count();
            let mut got = 0;
            for w in &words {
                let hit = w.clone().filter(|i| pos.contains(i)).count();
                if hit != 0 && hit != w.len() {
                    return Err(format!("whole_word split word {w:?}"));
                }
                got += usize::from(hit != 0);
            }
            if got != want {
                return Err(format!("whole_word masked {got} words, expected {want}"));
            }
        }
        MaskScheme::SalientSpan => {
            if !sample.entity_ranges.iter().any(|r| r.clone().collect::<Vec<_>>() == *pos) {
                return Err(format!("salient_span mask {pos:?} is not one entity span"));
            }
        }
        MaskScheme::ObjectSpan | MaskScheme::Deterministic => {
            if *pos != object {
                return Err(format!("{scheme} mask {pos:?} != object {object:?}"));
            }
        }
    }
    if m.input_ids.iter().filter(|&&t| t == MASK_ID).count() < pos.len() {
        return Err("missing mask sentinels".into());
    }
    Ok(())
}

/// Generic invariants: strictly increasing in-range positions, sentinels at
/// those positions, everything else untouched, unmask restores the input.
pub fn check_masking(
    sample: &detmask::masking::TokenizedSample,
    m: &detmask::masking::MaskedSample,
) -> Result<(), String> {
    use detmask::masking::MASK_ID;
    if m.mask_positions.len() != m.targets.len() {
        return Err("positions and targets differ in length".into());
    }
    if m.mask_positions.windows(2).any(|w| w[0] >= w[1]) {
        return Err("positions not strictly increasing".into());
    }
    for (i, (&inp, &orig)) in m.input_ids.iter().zip(&sample.tokens).enumerate() {
        let masked = m.mask_positions.binary_search(&i).is_ok();
        if masked && inp != MASK_ID || !masked && inp != orig {
            return Err(format!("position {i} corrupted"));
        }
    }
    if m.unmask() != sample.tokens {
        return Err("unmask does not restore the input".into());
    }
    Ok(())
}

fn word_ranges(starts: &[bool]) -> Vec<std::ops::Range<usize>> {
    let mut out: Vec<std::ops::Range<usize>> = Vec::new();
    for (i, &s) in starts.iter().enumerate() {
        if s || out.is_empty() {
            out.push(i..i + 1);
        } else {
            out.last_mut().unwrap().end = i + 1;
        }
    }
    out
}

/// The classification triple count rule: `|a| = |O|`, `|b| = |c| = |O| + |clues|`,
/// `b` adds exactly the clues, `c` adds only `Other` tokens.
pub fn check_triple(
    sample: &detmask::masking::TokenizedSample,
    t: &[detmask::masking::MaskedSample; 3],
) -> Result<(), String> {
    use detmask::masking::Role;
    let object: Vec<usize> = (0..sample.len()).filter(|&i| sample.roles[i] == Role::Object).collect();
    let clues: Vec<usize> = (0..sample.len()).filter(|&i| sample.roles[i].is_clue()).collect();
    for m in t {
        check_masking(sample, m)?;
    }
    let [a, b, c] = t;
    if a.mask_positions != object {
        return Err("keep-clues must mask exactly the object".into());
    }
    let mut oc: Vec<usize> = object.iter().chain(&clues).copied().collect();
    oc.sort_unstable();
    if b.mask_positions != oc {
        return Err("mask-clues must mask object and clues".into());
    }
    if b.mask_positions.len() != c.mask_positions.len() {
        return Err(format!("|b| = {} but |c| = {}", b.mask_positions.len(), c.mask_positions.len()));
    }
    for &p in &c.mask_positions {
        let ok = sample.roles[p] == Role::Object || sample.roles[p] == Role::Other;
        if !ok {
            return Err(format!("mask-random picked a {:?} token", sample.roles[p]));
        }
    }
    if !object.iter().all(|p| c.mask_positions.contains(p)) {
        return Err("mask-random must mask the object".into());
    }
    Ok(())
}
