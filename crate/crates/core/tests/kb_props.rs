mod common;

use std::io::Cursor;

use detmask::kb::{load_kb, KbBuilder, KnowledgeBase};
use proptest::prelude::*;

fn kb_strategy() -> impl Strategy<Value = KnowledgeBase> {
    (1usize..=50, 1usize..=5)
        .prop_flat_map(|(ne, np)| {
            (
                Just(ne),
                Just(np),
                prop::collection::vec((0..ne, 0..np, 0..ne), 0..=500),
            )
        })
        .prop_map(|(ne, np, triplets)| {
            let mut b = KbBuilder::new();
            for e in 0..ne {
                b = b.entity(&format!("Q{e}"), &format!("entity {e}"), &[]).unwrap();
            }
            for p in 0..np {
                b = b.predicate(&format!("P{p}"), &[&format!("rel {p}")]).unwrap();
            }
            for (s, p, o) in triplets {
                b = b.triplet(&format!("Q{s}"), &format!("P{p}"), &format!("Q{o}")).unwrap();
            }
            b.build().unwrap()
        })
}

fn to_tsv(kb: &KnowledgeBase) -> (String, String, String) {
    let triplets = kb
        .triplets()
        .iter()
        .map(|t| format!("{}\t{}\t{}\n", t.subject, t.predicate, t.object))
        .collect();
    let entities = kb
        .entity_aliases()
        .iter()
        .map(|(id, a)| format!("{id}\t{}\t{}\n", a[0], a.join("|")))
        .collect();
    let predicates = kb
        .predicate_aliases()
        .iter()
        .map(|(id, a)| format!("{id}\t{}\n", a.join("|")))
        .collect();
    (triplets, entities, predicates)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn index_matches_linear_scan(kb in kb_strategy()) {
        let n_triplets = kb.triplets().len();
        let mut total = 0;
        for (s, _) in kb.entity_aliases().iter() {
            for (p, _) in kb.predicate_aliases().iter() {
                let linear = common::linear_objects(&kb, s.as_str(), p.as_str());
                let indexed = kb.objects_for(s.as_str(), p.as_str());
                prop_assert_eq!(indexed, &linear);
                prop_assert_eq!(kb.is_deterministic(s.as_str(), p.as_str()), linear.len() == 1);
                total += linear.len();
            }
        }
        prop_assert_eq!(total, n_triplets);
    }

    #[test]
    fn predicates_between_matches_scan(kb in kb_strategy()) {
        for t in kb.triplets().iter().take(50) {
            let linear = common::linear_predicates(&kb, &t.subject, &t.object);
            prop_assert_eq!(kb.predicates_between(t.subject.as_str(), t.object.as_str()), &linear);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn load_is_idempotent(kb in kb_strategy()) {
        let (t, e, p) = to_tsv(&kb);
        let load = || load_kb(Cursor::new(&t), Cursor::new(&e), Cursor::new(&p)).unwrap();
        let (a, b) = (load(), load());
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.triplets(), kb.triplets());
    }
}

#[test]
fn directory_round_trip() {
    let kb = KbBuilder::new()
        .entity("Q1", "Jaws", &["jaws film"])
        .unwrap()
        .entity("Q2", "Steven Spielberg", &[])
        .unwrap()
        .predicate("P57", &["directed by", "director"])
        .unwrap()
        .triplet("Q1", "P57", "Q2")
        .unwrap()
        .build()
        .unwrap();
    let dir = tempfile::tempdir().unwrap();
    kb.write_dir(dir.path()).unwrap();
    let back = KnowledgeBase::load_dir(dir.path()).unwrap();
    assert_eq!(back.triplets(), kb.triplets());
    assert_eq!(back.entity_aliases().get("Q1"), kb.entity_aliases().get("Q1"));
    assert!(back.is_deterministic("Q1", "P57"));
    assert!(!back.is_deterministic("Q2", "P57"));
}

#[test]
fn comments_and_dangling_ids() {
    let e = "Q1\tA\nQ2\tB\n";
    let p = "P1\tknows\n";
    let kb = load_kb(Cursor::new("# header\nQ1\tP1\tQ2\n"), Cursor::new(e), Cursor::new(p)).unwrap();
    assert_eq!(kb.len(), 1);
    assert!(load_kb(Cursor::new("Q1\tP1\tQ9\n"), Cursor::new(e), Cursor::new(p)).is_err());
    assert!(load_kb(Cursor::new("Q1\tP1\n"), Cursor::new(e), Cursor::new(p)).is_err());
}
