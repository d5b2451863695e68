//! Character-offset text handling shared by alignment, masking and probing.
//!
//! All offsets in this crate are counted in Unicode scalar values (`char`s),
//! never bytes.

use std::ops::Range;

/// Simple one-to-one case fold. Keeps char offsets stable, unlike
/// `str::to_lowercase` which may change the char count.
#[inline]
pub fn fold_char(c: char) -> char {
    if c.is_ascii() {
        c.to_ascii_lowercase()
    } else {
        c.to_lowercase().next().unwrap_or(c)
    }
}

pub fn fold(s: &str) -> String {
    s.chars().map(fold_char).collect()
}

#[inline]
pub fn is_word_char(c: char) -> bool {
    c.is_alphanumeric()
}

/// Paragraph text decoded to chars, with a folded copy for matching.
#[derive(Debug, Clone)]
pub struct CharText {
    pub chars: Vec<char>,
    pub folded: Vec<char>,
}

impl CharText {
    pub fn new(text: &str) -> Self {
        let chars: Vec<char> = text.chars().collect();
        let folded = chars.iter().copied().map(fold_char).collect();
        Self { chars, folded }
    }

    pub fn len(&self) -> usize {
        self.chars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chars.is_empty()
    }

    pub fn slice(&self, range: Range<usize>) -> String {
        self.chars[range].iter().collect()
    }

    /// A match may begin at `i` if it does not split a run of word chars.
    pub fn is_start_boundary(&self, i: usize) -> bool {
        i == 0
            || i >= self.chars.len()
            || !is_word_char(self.chars[i - 1])
            || !is_word_char(self.chars[i])
    }

    /// A match may end at `j` (exclusive) if it does not split a run of word chars.
    pub fn is_end_boundary(&self, j: usize) -> bool {
        j == 0
            || j >= self.chars.len()
            || !is_word_char(self.chars[j - 1])
            || !is_word_char(self.chars[j])
    }
}

/// A token produced by [`pre_tokenize`]: char range, folded text, and
/// whether it starts a word.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawToken {
    pub start: usize,
    pub end: usize,
    pub text: String,
    pub word_start: bool,
}

/// Splits on whitespace and punctuation: maximal alphanumeric runs are one
/// token each, every other non-space char is a token by itself. Tokens are
/// lowercased.
///
/// Words are whitespace-separated chunks with edge punctuation split off:
/// in `"(Jaws)."` the words are `(`, `jaws`, `)`, `.`; in `"U.S"` the whole
/// chunk is one word of three tokens.
pub fn pre_tokenize(text: &str) -> Vec<RawToken> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if chars[i].is_whitespace() {
            i += 1;
            continue;
        }
        // one whitespace-delimited chunk
        let chunk_start = tokens.len();
        while i < chars.len() && !chars[i].is_whitespace() {
            let start = i;
            if is_word_char(chars[i]) {
                while i < chars.len() && is_word_char(chars[i]) {
                    i += 1;
                }
            } else {
                i += 1;
            }
            tokens.push(RawToken {
                start,
                end: i,
                text: chars[start..i].iter().copied().map(fold_char).collect(),
                word_start: false,
            });
        }
        mark_words(&mut tokens[chunk_start..], &chars);
    }
    tokens
}

fn mark_words(chunk: &mut [RawToken], chars: &[char]) {
    let is_alnum = |t: &RawToken| is_word_char(chars[t.start]);
    match (
        chunk.iter().position(is_alnum),
        chunk.iter().rposition(is_alnum),
    ) {
        (Some(first), Some(last)) => {
            for (k, t) in chunk.iter_mut().enumerate() {
                t.word_start = k < first || k == first || k > last;
            }
        }
        _ => chunk.iter_mut().for_each(|t| t.word_start = true),
    }
}

/// Folded token strings, the normal form used for exact-match comparisons.
pub fn token_strings(text: &str) -> Vec<String> {
    pre_tokenize(text).into_iter().map(|t| t.text).collect()
}
