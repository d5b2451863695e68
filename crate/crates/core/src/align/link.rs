//! Dictionary entity linker: case-insensitive alias matching at word
//! boundaries, leftmost then longest, non-overlapping.

use std::collections::HashMap;

use crate::kb::{EntityId, KnowledgeBase};
use crate::text::CharText;

const ROOT: u32 = 0;

/// Character trie over folded entity aliases.
#[derive(Debug, Clone)]
pub struct Gazetteer {
    edges: HashMap<(u32, char), u32>,
    terminal: Vec<Option<EntityId>>,
}

impl Gazetteer {
    pub fn from_kb(kb: &KnowledgeBase) -> Self {
        let mut g = Self {
            edges: HashMap::new(),
            terminal: vec![None],
        };
        for (id, aliases) in kb.entity_aliases().iter() {
            for alias in aliases {
                g.insert(alias, id);
            }
        }
        g
    }

    fn insert(&mut self, alias: &str, id: &EntityId) {
        let mut node = ROOT;
        for c in alias.chars().map(crate::text::fold_char) {
            let next = self.terminal.len() as u32;
            node = *self.edges.entry((node, c)).or_insert_with(|| next);
            if node == next {
                self.terminal.push(None);
            }
        }
        // an alias shared by several entities resolves to the smallest id
        let slot = &mut self.terminal[node as usize];
        match slot {
            Some(existing) if *existing <= *id => {}
            _ => *slot = Some(id.clone()),
        }
    }

    /// Returns `(start, end, entity)` char ranges in text order.
    pub fn find_all(&self, text: &CharText) -> Vec<(usize, usize, EntityId)> {
        let n = text.len();
        let mut out = Vec::new();
        let mut i = 0;
        while i < n {
            if text.chars[i].is_whitespace() || !text.is_start_boundary(i) {
                i += 1;
                continue;
            }
            let mut node = ROOT;
            let mut best: Option<(usize, &EntityId)> = None;
            let mut j = i;
            while j < n {
                match self.edges.get(&(node, text.folded[j])) {
                    Some(&next) => node = next,
                    None => break,
                }
                j += 1;
                if let Some(id) = &self.terminal[node as usize] {
                    if text.is_end_boundary(j) {
                        best = Some((j, id));
                    }
                }
            }
            match best {
                Some((end, id)) => {
                    out.push((i, end, id.clone()));
                    i = end;
                }
                None => i += 1,
            }
        }
        out
    }
}
