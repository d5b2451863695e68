//! Fuzzy predicate matching: find the substring of a paragraph that is
//! within edit distance 1 of some alias of a predicate.
//!
//! Candidates are windows that start at a token start and end at a token
//! end. Because a Levenshtein distance below 2 forces the window length to
//! be within one char of the alias length, only three window ends per
//! start need checking, and each check is a linear "at most one edit" scan.

use std::collections::HashMap;

use crate::kb::{KnowledgeBase, PredicateId};
use crate::text::{fold_char, pre_tokenize, CharText};

/// Token start positions and a per-offset "is a token end" table.
#[derive(Debug, Clone)]
pub struct TokenBounds {
    pub starts: Vec<usize>,
    pub is_end: Vec<bool>,
}

impl TokenBounds {
    pub fn new(text: &str, len: usize) -> Self {
        let toks = pre_tokenize(text);
        let mut is_end = vec![false; len + 1];
        for t in &toks {
            is_end[t.end] = true;
        }
        Self {
            starts: toks.iter().map(|t| t.start).collect(),
            is_end,
        }
    }
}

/// `Some(d)` with `d` in {0, 1} iff `lev(a, b) <= 1`.
pub fn within_one_edit(a: &[char], b: &[char]) -> Option<u8> {
    let (long, short) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    match long.len() - short.len() {
        0 => {
            let mut diff = 0u8;
            for (x, y) in long.iter().zip(short) {
                if x != y {
                    diff += 1;
                    if diff > 1 {
                        return None;
                    }
                }
            }
            Some(diff)
        }
        1 => {
            let i = long
                .iter()
                .zip(short)
                .position(|(x, y)| x != y)
                .unwrap_or(short.len());
            (long[i + 1..] == short[i..]).then_some(1)
        }
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowMatch {
    pub start: usize,
    pub end: usize,
    pub distance: u8,
}

impl WindowMatch {
    fn key(&self) -> (u8, usize, usize) {
        (self.distance, self.start, self.end - self.start)
    }
}

/// Folded alias strings per predicate.
#[derive(Debug, Clone)]
pub struct PredicateMatcher {
    aliases: HashMap<PredicateId, Vec<Vec<char>>>,
}

impl PredicateMatcher {
    pub fn from_kb(kb: &KnowledgeBase) -> Self {
        let aliases = kb
            .predicate_aliases()
            .iter()
            .map(|(id, list)| {
                let folded = list
                    .iter()
                    .map(|a| a.chars().map(fold_char).collect())
                    .collect();
                (id.clone(), folded)
            })
            .collect();
        Self { aliases }
    }

    /// Best window over all aliases of `predicate`, ordered by distance,
    /// then start offset, then length.
    pub fn best_match(
        &self,
        text: &CharText,
        bounds: &TokenBounds,
        predicate: &str,
    ) -> Option<WindowMatch> {
        let aliases = self.aliases.get(predicate)?;
        let n = text.len();
        let mut best: Option<WindowMatch> = None;
        for alias in aliases {
            let m = alias.len();
            for &s in &bounds.starts {
                let lo = (s + m).saturating_sub(1).max(s + 1);
                let hi = (s + m + 1).min(n);
                for e in lo..=hi {
                    if !bounds.is_end[e] {
                        continue;
                    }
                    if let Some(d) = within_one_edit(&text.folded[s..e], alias) {
                        let cand = WindowMatch {
                            start: s,
                            end: e,
                            distance: d,
                        };
                        if best.is_none_or(|b| cand.key() < b.key()) {
                            best = Some(cand);
                        }
                    }
                }
            }
        }
        best
    }
}
