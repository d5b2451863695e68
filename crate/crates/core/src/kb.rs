//! Triplet knowledge base with alias tables and a (subject, predicate) index.
//!
//! The base is loaded once from three tab-separated files and is immutable
//! afterwards, so it can be shared freely across alignment threads.
//!
//! File formats (UTF-8, LF, `#` comment lines and blank lines ignored):
//!
//! ```text
//! triplets.tsv    subject<TAB>predicate<TAB>object
//! entities.tsv    id<TAB>canonical<TAB>alias1|alias2|...
//! predicates.tsv  id<TAB>alias1|alias2|...
//! ```

use std::borrow::Borrow;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const TRIPLETS_FILE: &str = "triplets.tsv";
pub const ENTITIES_FILE: &str = "entities.tsv";
pub const PREDICATES_FILE: &str = "predicates.tsv";

#[derive(Debug, Error)]
pub enum KbError {
    #[error("{file}:{line}: malformed line: {reason}")]
    MalformedLine {
        file: &'static str,
        line: usize,
        reason: String,
    },
    #[error("triplet references unknown id {0:?}")]
    DanglingReference(String),
    #[error("invalid identifier {0:?}: ids must be non-empty and contain no whitespace")]
    InvalidId(String),
    #[error("duplicate {kind} id {id:?}")]
    DuplicateId { kind: &'static str, id: String },
    #[error("io error")]
    Io(#[from] io::Error),
}

macro_rules! id_type {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(String);

        impl $name {
            /// Validates that the id is non-empty and whitespace-free.
            pub fn new(id: impl Into<String>) -> Result<Self, KbError> {
                let id = id.into();
                if id.is_empty() || id.chars().any(char::is_whitespace) {
                    return Err(KbError::InvalidId(id));
                }
                Ok(Self(id))
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl Borrow<str> for $name {
            fn borrow(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }
    };
}

id_type!(
    /// Opaque, case-sensitive entity identifier (e.g. a Wikidata `Q` id).
    EntityId
);
id_type!(
    /// Opaque, case-sensitive predicate identifier (e.g. a Wikidata `P` id).
    PredicateId
);

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Triplet {
    pub subject: EntityId,
    pub predicate: PredicateId,
    pub object: EntityId,
}

impl Triplet {
    pub fn new(subject: EntityId, predicate: PredicateId, object: EntityId) -> Self {
        Self {
            subject,
            predicate,
            object,
        }
    }
}

impl fmt::Display for Triplet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.subject, self.predicate, self.object)
    }
}

/// Ordered surface strings per id. For entities the canonical name comes first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AliasTable<K: Ord> {
    entries: BTreeMap<K, Vec<String>>,
}

impl<K: Ord> Default for AliasTable<K> {
    fn default() -> Self {
        Self {
            entries: BTreeMap::new(),
        }
    }
}

impl<K: Ord + Borrow<str>> AliasTable<K> {
    pub fn get(&self, id: &str) -> Option<&[String]> {
        self.entries.get(id).map(Vec::as_slice)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.entries.contains_key(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&K, &[String])> {
        self.entries.iter().map(|(k, v)| (k, v.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn insert(&mut self, id: K, aliases: Vec<String>) -> bool {
        self.entries.insert(id, aliases).is_none()
    }
}

static NO_OBJECTS: BTreeSet<EntityId> = BTreeSet::new();
static NO_PREDICATES: BTreeSet<PredicateId> = BTreeSet::new();

/// In-memory knowledge base. Construct with [`load_kb`], [`KnowledgeBase::load_dir`]
/// or [`KbBuilder`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KnowledgeBase {
    triplets: BTreeSet<Triplet>,
    entity_aliases: AliasTable<EntityId>,
    predicate_aliases: AliasTable<PredicateId>,
    sp_index: HashMap<EntityId, HashMap<PredicateId, BTreeSet<EntityId>>>,
    so_index: HashMap<EntityId, HashMap<EntityId, BTreeSet<PredicateId>>>,
}

impl KnowledgeBase {
    fn from_parts(
        triplets: BTreeSet<Triplet>,
        entity_aliases: AliasTable<EntityId>,
        predicate_aliases: AliasTable<PredicateId>,
    ) -> Result<Self, KbError> {
        for t in &triplets {
            for e in [&t.subject, &t.object] {
                if !entity_aliases.contains(e.as_str()) {
                    return Err(KbError::DanglingReference(e.to_string()));
                }
            }
            if !predicate_aliases.contains(t.predicate.as_str()) {
                return Err(KbError::DanglingReference(t.predicate.to_string()));
            }
        }
        let mut kb = Self {
            triplets,
            entity_aliases,
            predicate_aliases,
            sp_index: HashMap::new(),
            so_index: HashMap::new(),
        };
        kb.rebuild_indexes();
        Ok(kb)
    }

    fn rebuild_indexes(&mut self) {
        self.sp_index.clear();
        self.so_index.clear();
        for t in &self.triplets {
            self.sp_index
                .entry(t.subject.clone())
                .or_default()
                .entry(t.predicate.clone())
                .or_default()
                .insert(t.object.clone());
            self.so_index
                .entry(t.subject.clone())
                .or_default()
                .entry(t.object.clone())
                .or_default()
                .insert(t.predicate.clone());
        }
    }

    /// Reads `triplets.tsv`, `entities.tsv` and `predicates.tsv` from `dir`.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self, KbError> {
        let dir = dir.as_ref();
        let open = |name: &str| -> Result<BufReader<File>, KbError> {
            let path = dir.join(name);
            File::open(&path).map(BufReader::new).map_err(|e| {
                KbError::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display())))
            })
        };
        load_kb(
            open(TRIPLETS_FILE)?,
            open(ENTITIES_FILE)?,
            open(PREDICATES_FILE)?,
        )
    }

    /// Writes the three TSV files in canonical (sorted, deduplicated) form.
    pub fn write_dir(&self, dir: impl AsRef<Path>) -> io::Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let mut w = BufWriter::new(File::create(dir.join(TRIPLETS_FILE))?);
        for t in &self.triplets {
            writeln!(w, "{}\t{}\t{}", t.subject, t.predicate, t.object)?;
        }
        w.flush()?;
        let mut w = BufWriter::new(File::create(dir.join(ENTITIES_FILE))?);
        for (id, aliases) in self.entity_aliases.iter() {
            writeln!(w, "{}\t{}\t{}", id, aliases[0], aliases.join("|"))?;
        }
        w.flush()?;
        let mut w = BufWriter::new(File::create(dir.join(PREDICATES_FILE))?);
        for (id, aliases) in self.predicate_aliases.iter() {
            writeln!(w, "{}\t{}", id, aliases.join("|"))?;
        }
        w.flush()
    }

    pub fn triplets(&self) -> &BTreeSet<Triplet> {
        &self.triplets
    }

    pub fn len(&self) -> usize {
        self.triplets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triplets.is_empty()
    }

    pub fn contains(&self, subject: &str, predicate: &str, object: &str) -> bool {
        self.objects_for(subject, predicate).contains(object)
    }

    pub fn entity_aliases(&self) -> &AliasTable<EntityId> {
        &self.entity_aliases
    }

    pub fn predicate_aliases(&self) -> &AliasTable<PredicateId> {
        &self.predicate_aliases
    }

    /// Canonical surface name of an entity.
    pub fn entity_name(&self, id: &str) -> Option<&str> {
        self.entity_aliases.get(id).map(|a| a[0].as_str())
    }

    /// All objects `o` such that `(subject, predicate, o)` is in the base.
    /// Unknown pairs yield the empty set.
    pub fn objects_for(&self, subject: &str, predicate: &str) -> &BTreeSet<EntityId> {
        self.sp_index
            .get(subject)
            .and_then(|m| m.get(predicate))
            .unwrap_or(&NO_OBJECTS)
    }

    /// True iff exactly one object completes `(subject, predicate, ·)`.
    /// A pair with no objects has no ground truth and is not deterministic.
    pub fn is_deterministic(&self, subject: &str, predicate: &str) -> bool {
        self.objects_for(subject, predicate).len() == 1
    }

    /// Predicates `r` with `(subject, r, object)` in the base.
    pub fn predicates_between(&self, subject: &str, object: &str) -> &BTreeSet<PredicateId> {
        self.so_index
            .get(subject)
            .and_then(|m| m.get(object))
            .unwrap_or(&NO_PREDICATES)
    }

    /// True iff every subject that has `predicate` has exactly one object for it.
    /// Predicates that never occur are reported as functional.
    pub fn is_functional(&self, predicate: &str) -> bool {
        self.sp_index
            .values()
            .filter_map(|m| m.get(predicate))
            .all(|objects| objects.len() == 1)
    }
}

/// Programmatic construction, used by the synthetic generators and tests.
#[derive(Debug, Default)]
pub struct KbBuilder {
    triplets: BTreeSet<Triplet>,
    entities: AliasTable<EntityId>,
    predicates: AliasTable<PredicateId>,
}

impl KbBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds an entity; `canonical` is always the first alias.
    pub fn entity(mut self, id: &str, canonical: &str, aliases: &[&str]) -> Result<Self, KbError> {
        let id = EntityId::new(id)?;
        let list = alias_list(std::iter::once(canonical).chain(aliases.iter().copied()));
        if list.is_empty() {
            return Err(KbError::MalformedLine {
                file: ENTITIES_FILE,
                line: 0,
                reason: format!("entity {id} has no non-empty alias"),
            });
        }
        let key = id.to_string();
        if !self.entities.insert(id, list) {
            return Err(KbError::DuplicateId {
                kind: "entity",
                id: key,
            });
        }
        Ok(self)
    }

    pub fn predicate(mut self, id: &str, aliases: &[&str]) -> Result<Self, KbError> {
        let id = PredicateId::new(id)?;
        let list = alias_list(aliases.iter().copied());
        if list.is_empty() {
            return Err(KbError::MalformedLine {
                file: PREDICATES_FILE,
                line: 0,
                reason: format!("predicate {id} has no non-empty alias"),
            });
        }
        let key = id.to_string();
        if !self.predicates.insert(id, list) {
            return Err(KbError::DuplicateId {
                kind: "predicate",
                id: key,
            });
        }
        Ok(self)
    }

    pub fn triplet(mut self, s: &str, p: &str, o: &str) -> Result<Self, KbError> {
        self.triplets.insert(Triplet::new(
            EntityId::new(s)?,
            PredicateId::new(p)?,
            EntityId::new(o)?,
        ));
        Ok(self)
    }

    pub fn build(self) -> Result<KnowledgeBase, KbError> {
        KnowledgeBase::from_parts(self.triplets, self.entities, self.predicates)
    }
}

fn alias_list<'a>(raw: impl Iterator<Item = &'a str>) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for a in raw {
        let a = a.trim();
        if !a.is_empty() && !out.iter().any(|x| x == a) {
            out.push(a.to_string());
        }
    }
    out
}

/// Yields `(line_number, fields)` for every non-comment, non-blank line.
fn data_lines<R: BufRead>(
    reader: R,
    file: &'static str,
) -> impl Iterator<Item = Result<(usize, Vec<String>), KbError>> {
    reader
        .lines()
        .enumerate()
        .filter_map(move |(i, line)| match line {
            Err(e) => Some(Err(KbError::Io(e))),
            Ok(line) => {
                let line = line.strip_suffix('\r').unwrap_or(&line);
                if line.trim().is_empty() || line.starts_with('#') {
                    None
                } else {
                    Some(Ok((i + 1, line.split('\t').map(str::to_string).collect())))
                }
            }
        })
        .map(move |r| {
            r.map_err(|e| match e {
                KbError::Io(e) => KbError::Io(io::Error::new(e.kind(), format!("{file}: {e}"))),
                other => other,
            })
        })
}

fn malformed(file: &'static str, line: usize, reason: impl Into<String>) -> KbError {
    KbError::MalformedLine {
        file,
        line,
        reason: reason.into(),
    }
}

/// Parses the three tabular sources into an indexed knowledge base.
/// Duplicate triplet lines collapse to one triplet.
pub fn load_kb<T: BufRead, E: BufRead, P: BufRead>(
    triplets: T,
    entities: E,
    predicates: P,
) -> Result<KnowledgeBase, KbError> {
    let mut entity_aliases = AliasTable::default();
    for row in data_lines(entities, ENTITIES_FILE) {
        let (line, fields) = row?;
        if fields.len() < 2 || fields.len() > 3 {
            return Err(malformed(
                ENTITIES_FILE,
                line,
                format!("expected 2 or 3 tab-separated fields, got {}", fields.len()),
            ));
        }
        let id = EntityId::new(fields[0].as_str())
            .map_err(|e| malformed(ENTITIES_FILE, line, e.to_string()))?;
        let extra = fields.get(2).map(String::as_str).unwrap_or("");
        let list = alias_list(
            std::iter::once(fields[1].as_str()).chain(extra.split('|')),
        );
        if fields[1].trim().is_empty() {
            return Err(malformed(ENTITIES_FILE, line, "empty canonical name"));
        }
        let key = id.to_string();
        if !entity_aliases.insert(id, list) {
            return Err(malformed(ENTITIES_FILE, line, format!("duplicate id {key}")));
        }
    }

    let mut predicate_aliases = AliasTable::default();
    for row in data_lines(predicates, PREDICATES_FILE) {
        let (line, fields) = row?;
        if fields.len() != 2 {
            return Err(malformed(
                PREDICATES_FILE,
                line,
                format!("expected 2 tab-separated fields, got {}", fields.len()),
            ));
        }
        let id = PredicateId::new(fields[0].as_str())
            .map_err(|e| malformed(PREDICATES_FILE, line, e.to_string()))?;
        let list = alias_list(fields[1].split('|'));
        if list.is_empty() {
            return Err(malformed(PREDICATES_FILE, line, "no non-empty alias"));
        }
        let key = id.to_string();
        if !predicate_aliases.insert(id, list) {
            return Err(malformed(PREDICATES_FILE, line, format!("duplicate id {key}")));
        }
    }

    let mut set = BTreeSet::new();
    for row in data_lines(triplets, TRIPLETS_FILE) {
        let (line, fields) = row?;
        if fields.len() != 3 {
            return Err(malformed(
                TRIPLETS_FILE,
                line,
                format!("expected 3 tab-separated fields, got {}", fields.len()),
            ));
        }
        let bad = |e: KbError| malformed(TRIPLETS_FILE, line, e.to_string());
        set.insert(Triplet::new(
            EntityId::new(fields[0].as_str()).map_err(bad)?,
            PredicateId::new(fields[1].as_str()).map_err(bad)?,
            EntityId::new(fields[2].as_str()).map_err(bad)?,
        ));
    }

    KnowledgeBase::from_parts(set, entity_aliases, predicate_aliases)
}
