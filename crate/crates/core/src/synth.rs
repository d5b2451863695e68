//! Seeded synthetic knowledge bases and corpora.
//!
//! * [`random_fixture`]: adversarial alias overlap, typos, casing, non-ASCII
//!   and pre-linked spans, for differential testing of alignment.
//! * [`nondeterministic_fixture`]: an exact count of non-deterministic
//!   candidates.
//! * [`throughput_fixture`]: long paragraphs against a large KB.
//! * [`n1_world`]: a small world of N-1 facts with corpus sentences, probe
//!   templates and facts.

use std::collections::BTreeSet;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::align::{LinkedSpan, Paragraph};
use crate::kb::{EntityId, KbBuilder, KnowledgeBase, PredicateId, Triplet};
use crate::probe::{Fact, RelationType, Template};

/// A knowledge base with a corpus to align against it.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub kb: KnowledgeBase,
    pub corpus: Vec<Paragraph>,
}

const CONSONANTS: &[char] = &['b', 'd', 'f', 'g', 'k', 'l', 'm', 'n', 'p', 'r', 's', 't', 'v', 'z'];
const VOWELS: &[char] = &['a', 'e', 'i', 'o', 'u'];

/// Lowercase consonant-vowel pseudo-word with `syllables` syllables.
pub fn pseudo_word<R: Rng + ?Sized>(rng: &mut R, syllables: usize) -> String {
    (0..syllables)
        .flat_map(|_| [*CONSONANTS.choose(rng).unwrap(), *VOWELS.choose(rng).unwrap()])
        .collect()
}

/// `n` distinct pseudo-words not in `taken`; inserts them into `taken`.
pub fn distinct_words<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    syllables: usize,
    taken: &mut BTreeSet<String>,
) -> Vec<String> {
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let w = pseudo_word(rng, syllables);
        if taken.insert(w.clone()) {
            out.push(w);
        }
    }
    out
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

/// One random edit (insert, delete or substitute a letter) at a non-edge
/// position so the result stays inside its token window.
fn typo<R: Rng + ?Sized>(rng: &mut R, s: &str) -> String {
    let mut chars: Vec<char> = s.chars().collect();
    let candidates: Vec<usize> = (1..chars.len().saturating_sub(1))
        .filter(|&i| chars[i].is_alphanumeric() && chars[i - 1].is_alphanumeric())
        .collect();
    let Some(&i) = candidates.choose(rng) else {
        return s.to_string();
    };
    let letter = *VOWELS.choose(rng).unwrap();
    match rng.random_range(0..3) {
        0 => chars.insert(i, letter),
        1 => {
            chars.remove(i);
        }
        _ => chars[i] = letter,
    }
    chars.into_iter().collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FixtureOptions {
    pub max_paragraphs: usize,
    pub max_triplets: usize,
}

impl Default for FixtureOptions {
    fn default() -> Self {
        Self {
            max_paragraphs: 100,
            max_triplets: 500,
        }
    }
}

/// Small KB and corpus designed to exercise every alignment corner case:
/// shared and nested aliases, mixed case, one-edit predicate typos, multi-byte
/// characters, punctuation adjacency and pre-linked paragraphs.
pub fn random_fixture(seed: u64, opts: FixtureOptions) -> Fixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut taken = BTreeSet::new();
    let mut pool = distinct_words(&mut rng, 24, 1, &mut taken);
    pool.extend(["café", "über", "naïve", "Ørsted"].map(String::from));
    let pred_pool = distinct_words(&mut rng, 12, 2, &mut taken);

    let n_entities = rng.random_range(8..=40);
    let n_predicates = rng.random_range(2..=8);
    let mut entity_aliases: Vec<Vec<String>> = Vec::new();
    let mut builder = KbBuilder::new();
    for e in 0..n_entities {
        let n_alias = rng.random_range(1..=3);
        let aliases: Vec<String> = (0..n_alias)
            .map(|_| {
                let words = rng.random_range(1..=3);
                (0..words)
                    .map(|_| pool.choose(&mut rng).unwrap().clone())
                    .collect::<Vec<_>>()
                    .join(" ")
            })
            .collect();
        let refs: Vec<&str> = aliases[1..].iter().map(String::as_str).collect();
        builder = builder
            .entity(&format!("Q{e}"), &aliases[0], &refs)
            .expect("valid entity");
        entity_aliases.push(aliases);
    }
    let mut predicate_aliases: Vec<Vec<String>> = Vec::new();
    for p in 0..n_predicates {
        let n_alias = rng.random_range(1..=2);
        let aliases: Vec<String> = (0..n_alias)
            .map(|_| {
                let words = rng.random_range(1..=2);
                (0..words)
                    .map(|_| {
                        if rng.random_bool(0.2) {
                            pool.choose(&mut rng).unwrap().clone()
                        } else {
                            pred_pool.choose(&mut rng).unwrap().clone()
                        }
                    })
                    .collect::<Vec<_>>()
                    .join(" ")
            })
            .collect();
        let refs: Vec<&str> = aliases.iter().map(String::as_str).collect();
        builder = builder
            .predicate(&format!("P{p}"), &refs)
            .expect("valid predicate");
        predicate_aliases.push(aliases);
    }
    let n_triplets = rng.random_range(1..=opts.max_triplets.max(1));
    for _ in 0..n_triplets {
        let s = rng.random_range(0..n_entities);
        let o = rng.random_range(0..n_entities);
        let p = rng.random_range(0..n_predicates);
        builder = builder
            .triplet(&format!("Q{s}"), &format!("P{p}"), &format!("Q{o}"))
            .expect("valid triplet");
    }
    let kb = builder.build().expect("consistent fixture");

    let n_paragraphs = rng.random_range(1..=opts.max_paragraphs.max(1));
    let corpus = (0..n_paragraphs)
        .map(|i| {
            let mut text = String::new();
            let mut links = Vec::new();
            let mut len = 0usize;
            let items = rng.random_range(1..=24);
            for _ in 0..items {
                let (piece, entity) = match rng.random_range(0..10) {
                    0..=2 => {
                        let e = rng.random_range(0..n_entities);
                        let a = entity_aliases[e].choose(&mut rng).unwrap();
                        let a = if rng.random_bool(0.3) { capitalize(a) } else { a.clone() };
                        (a, Some(e))
                    }
                    3..=4 => {
                        let p = predicate_aliases.choose(&mut rng).unwrap();
                        let a = p.choose(&mut rng).unwrap();
                        let a = if rng.random_bool(0.4) { typo(&mut rng, a) } else { a.clone() };
                        (a, None)
                    }
                    5 => ([",", ".", "(", ")", "'s", "-"].choose(&mut rng).unwrap().to_string(), None),
                    _ => (pool.choose(&mut rng).unwrap().clone(), None),
                };
                let sep = if text.is_empty() || (piece.len() <= 2 && rng.random_bool(0.5)) {
                    ""
                } else {
                    " "
                };
                text.push_str(sep);
                len += sep.len();
                let start = len;
                let n = piece.chars().count();
                text.push_str(&piece);
                len += n;
                if let Some(e) = entity {
                    links.push(LinkedSpan {
                        start,
                        end: start + n,
                        entity: EntityId::new(format!("Q{e}")).unwrap(),
                    });
                }
            }
            let p = Paragraph::new(format!("doc{i}"), text);
            let linked = !links.is_empty() && rng.random_bool(0.2);
            let p = if linked { p.with_links(links) } else { p };
            if p.validate().is_ok() {
                p
            } else {
                Paragraph {
                    pre_linked: None,
                    ..p
                }
            }
        })
        .collect();
    Fixture { kb, corpus }
}

/// `total` one-fact paragraphs, each yielding exactly one candidate triplet,
/// of which exactly `nondeterministic` have a second object in the KB.
pub fn nondeterministic_fixture(nondeterministic: usize, total: usize) -> Fixture {
    assert!(nondeterministic <= total, "more non-deterministic than total");
    let mut builder = KbBuilder::new()
        .predicate("P1", &["related to"])
        .expect("valid predicate");
    let mut corpus = Vec::with_capacity(total);
    for i in 0..total {
        let (s, o) = (format!("subj{i}"), format!("obj{i}"));
        builder = builder
            .entity(&format!("S{i}"), &s, &[])
            .and_then(|b| b.entity(&format!("O{i}"), &o, &[]))
            .and_then(|b| b.triplet(&format!("S{i}"), "P1", &format!("O{i}")))
            .expect("valid fixture");
        if i < nondeterministic {
            builder = builder
                .entity(&format!("X{i}"), &format!("other{i}"), &[])
                .and_then(|b| b.triplet(&format!("S{i}"), "P1", &format!("X{i}")))
                .expect("valid fixture");
        }
        corpus.push(Paragraph::new(format!("doc{i}"), format!("{s} is related to {o} .")));
    }
    Fixture {
        kb: builder.build().expect("valid fixture"),
        corpus,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ThroughputOptions {
    pub paragraphs: usize,
    pub tokens_per_paragraph: usize,
    pub triplets: usize,
    pub entities: usize,
    pub predicates: usize,
}

impl Default for ThroughputOptions {
    fn default() -> Self {
        Self {
            paragraphs: 10_000,
            tokens_per_paragraph: 150,
            triplets: 10_000,
            entities: 3_000,
            predicates: 60,
        }
    }
}

/// Large KB and a corpus of long paragraphs mixing filler words, entity
/// mentions and predicate phrases.
pub fn throughput_fixture(seed: u64, opts: ThroughputOptions) -> Fixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut taken = BTreeSet::new();
    let filler = distinct_words(&mut rng, 400, 2, &mut taken);
    let names = distinct_words(&mut rng, opts.entities, 3, &mut taken);
    let verbs = distinct_words(&mut rng, opts.predicates * 2, 2, &mut taken);
    let mut builder = KbBuilder::new();
    let mut entity_names = Vec::with_capacity(opts.entities);
    for (e, name) in names.iter().enumerate() {
        // every fourth entity has a two-word canonical name and a short alias
        let canonical = if e % 4 == 0 {
            format!("{name} {}", filler[e % filler.len()])
        } else {
            name.clone()
        };
        builder = builder
            .entity(&format!("Q{e}"), &canonical, &[name.as_str()])
            .expect("valid entity");
        entity_names.push(canonical);
    }
    let mut predicate_names = Vec::with_capacity(opts.predicates);
    for p in 0..opts.predicates {
        let alias = format!("{} {}", verbs[2 * p], verbs[2 * p + 1]);
        builder = builder
            .predicate(&format!("P{p}"), &[alias.as_str()])
            .expect("valid predicate");
        predicate_names.push(alias);
    }
    let mut facts = Vec::with_capacity(opts.triplets);
    let mut seen = BTreeSet::new();
    while facts.len() < opts.triplets {
        let s = rng.random_range(0..opts.entities);
        let o = rng.random_range(0..opts.entities);
        let p = rng.random_range(0..opts.predicates);
        if s != o && seen.insert((s, p, o)) {
            builder = builder
                .triplet(&format!("Q{s}"), &format!("P{p}"), &format!("Q{o}"))
                .expect("valid triplet");
            facts.push((s, p, o));
        }
    }
    let kb = builder.build().expect("valid fixture");

    let corpus = (0..opts.paragraphs)
        .map(|i| {
            let mut words: Vec<String> = Vec::with_capacity(opts.tokens_per_paragraph + 8);
            while words.len() < opts.tokens_per_paragraph {
                match rng.random_range(0..12) {
                    0 => {
                        let &(s, p, o) = facts.choose(&mut rng).unwrap();
                        let verb = if rng.random_bool(0.2) {
                            typo(&mut rng, &predicate_names[p])
                        } else {
                            predicate_names[p].clone()
                        };
                        words.extend([entity_names[s].clone(), verb, entity_names[o].clone(), ".".into()]);
                    }
                    1 => words.push(capitalize(&entity_names[rng.random_range(0..opts.entities)])),
                    2 => words.push(",".into()),
                    _ => words.push(filler.choose(&mut rng).unwrap().clone()),
                }
            }
            Paragraph::new(format!("doc{i}"), words.join(" "))
        })
        .collect();
    Fixture { kb, corpus }
}

/// One N-1 relation of the synthetic world.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationSpec {
    pub id: &'static str,
    pub aliases: &'static [&'static str],
    /// Sentence patterns with `[X]` and `[Y]`, also used as probe templates.
    pub patterns: &'static [&'static str],
    pub object_kind: ObjectKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectKind {
    City,
    Country,
    Company,
}

pub const WORLD_RELATIONS: [RelationSpec; 3] = [
    RelationSpec {
        id: "P19",
        aliases: &["born in", "native of", "birthplace"],
        patterns: &[
            "[X] was born in [Y] .",
            "[X] is a native of [Y] .",
            "the birthplace of [X] is [Y] .",
        ],
        object_kind: ObjectKind::City,
    },
    RelationSpec {
        id: "P27",
        aliases: &["citizen of", "citizenship", "nationality"],
        patterns: &[
            "[X] is a citizen of [Y] .",
            "[X] holds the citizenship of [Y] .",
            "the nationality of [X] is [Y] .",
        ],
        object_kind: ObjectKind::Country,
    },
    RelationSpec {
        id: "P108",
        aliases: &["works for", "employed by", "employer"],
        patterns: &[
            "[X] works for [Y] .",
            "[X] is employed by [Y] .",
            "the employer of [X] is [Y] .",
        ],
        object_kind: ObjectKind::Company,
    },
];

const FILLER: [&str; 12] = [
    "it rained for most of the day .",
    "the meeting ended early .",
    "many people attended the event .",
    "the report was published last year .",
    "nobody expected the result .",
    "a new road was opened recently .",
    "the weather stayed mild all week .",
    "local news covered the story .",
    "the museum was closed on monday .",
    "prices went up again this month .",
    "the festival drew a large crowd .",
    "a short film about it was made .",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WorldOptions {
    pub persons: usize,
    pub cities: usize,
    pub countries: usize,
    pub companies: usize,
    /// Training paragraphs; every fact is covered before any repeats.
    pub paragraphs: usize,
    /// Additional paragraphs drawn from the same facts, for held-out use.
    pub heldout_paragraphs: usize,
}

impl Default for WorldOptions {
    fn default() -> Self {
        Self {
            persons: 60,
            cities: 15,
            countries: 10,
            companies: 15,
            paragraphs: 600,
            heldout_paragraphs: 150,
        }
    }
}

/// Synthetic N-1 world: persons with a birthplace, a citizenship and an
/// employer, described by varied sentence patterns.
#[derive(Debug, Clone)]
pub struct World {
    pub kb: KnowledgeBase,
    pub corpus: Vec<Paragraph>,
    pub heldout: Vec<Paragraph>,
    pub facts: Vec<Fact>,
    pub templates: Vec<Template>,
}

pub fn n1_world(seed: u64, opts: WorldOptions) -> World {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut taken: BTreeSet<String> = FILLER
        .iter()
        .chain(WORLD_RELATIONS.iter().flat_map(|r| r.patterns.iter()))
        .flat_map(|s| s.split_whitespace().map(str::to_string))
        .collect();
    let persons = distinct_words(&mut rng, opts.persons, 3, &mut taken);
    let cities = distinct_words(&mut rng, opts.cities, 2, &mut taken);
    let countries = distinct_words(&mut rng, opts.countries, 3, &mut taken);
    let companies = distinct_words(&mut rng, opts.companies, 2, &mut taken);

    let mut builder = KbBuilder::new();
    let add = |b: KbBuilder, prefix: &str, names: &[String]| {
        names.iter().enumerate().fold(b, |b, (i, n)| {
            b.entity(&format!("{prefix}{i}"), n, &[]).expect("valid entity")
        })
    };
    builder = add(builder, "E", &persons);
    builder = add(builder, "C", &cities);
    builder = add(builder, "N", &countries);
    builder = add(builder, "F", &companies);
    for r in &WORLD_RELATIONS {
        builder = builder.predicate(r.id, r.aliases).expect("valid predicate");
    }

    let mut facts = Vec::new();
    for (i, person) in persons.iter().enumerate() {
        for r in &WORLD_RELATIONS {
            let (prefix, names) = match r.object_kind {
                ObjectKind::City => ("C", &cities),
                ObjectKind::Country => ("N", &countries),
                ObjectKind::Company => ("F", &companies),
            };
            let o = rng.random_range(0..names.len());
            let (s_id, o_id) = (format!("E{i}"), format!("{prefix}{o}"));
            builder = builder.triplet(&s_id, r.id, &o_id).expect("valid triplet");
            facts.push(Fact {
                triplet: Triplet::new(
                    EntityId::new(s_id).unwrap(),
                    PredicateId::new(r.id).unwrap(),
                    EntityId::new(o_id).unwrap(),
                ),
                subject_surface: person.clone(),
                object_surface: names[o].clone(),
                relation_type: RelationType::N1Or11,
                in_domain: false,
            });
        }
    }
    let kb = builder.build().expect("valid world");
    let templates = WORLD_RELATIONS
        .iter()
        .flat_map(|r| {
            r.patterns
                .iter()
                .map(|p| Template::new(PredicateId::new(r.id).unwrap(), *p).expect("valid template"))
        })
        .collect();

    let mut order: Vec<usize> = (0..facts.len()).collect();
    let mut cursor = order.len();
    let mut next_fact = |rng: &mut ChaCha8Rng| {
        if cursor == order.len() {
            order.shuffle(rng);
            cursor = 0;
        }
        cursor += 1;
        order[cursor - 1]
    };
    let mut paragraph = |rng: &mut ChaCha8Rng, doc_id: String| {
        let mut sentences: Vec<String> = Vec::new();
        for _ in 0..rng.random_range(1..=2) {
            let f = &facts[next_fact(rng)];
            let spec = WORLD_RELATIONS
                .iter()
                .find(|r| r.id == f.triplet.predicate.as_str())
                .expect("known relation");
            let pattern = spec.patterns.choose(rng).unwrap();
            sentences.push(
                pattern
                    .replace("[X]", &f.subject_surface)
                    .replace("[Y]", &f.object_surface),
            );
        }
        for _ in 0..rng.random_range(1..=2) {
            sentences.push(FILLER.choose(rng).unwrap().to_string());
        }
        sentences.shuffle(rng);
        Paragraph::new(doc_id, sentences.join(" "))
    };
    let corpus = (0..opts.paragraphs)
        .map(|i| paragraph(&mut rng, format!("w{i}")))
        .collect();
    let heldout = (0..opts.heldout_paragraphs)
        .map(|i| paragraph(&mut rng, format!("h{i}")))
        .collect();
    World {
        kb,
        corpus,
        heldout,
        facts,
        templates,
    }
}
