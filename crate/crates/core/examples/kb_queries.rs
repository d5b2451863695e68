//! Build a small knowledge base, query it, and round-trip it through TSV files.
//!
//! ```bash
//! cargo run --example kb_queries
//! ```

use detmask::kb::{KbBuilder, KnowledgeBase};

fn main() -> anyhow::Result<()> {
    let kb = KbBuilder::new()
        .entity("Q1", "War Horse", &[])?
        .entity("Q2", "Steven Spielberg", &["Spielberg"])?
        .entity("Q3", "Jaws", &[])?
        .entity("Q4", "John Williams", &[])?
        .predicate("P57", &["directed by", "director"])?
        .predicate("P58", &["director of"])?
        .predicate("P86", &["composed by", "music by"])?
        .triplet("Q1", "P57", "Q2")?
        .triplet("Q3", "P57", "Q2")?
        .triplet("Q2", "P58", "Q1")?
        .triplet("Q2", "P58", "Q3")?
        .triplet("Q3", "P86", "Q4")?
        .build()?;

    println!("{} triplets", kb.len());
    for (s, p) in [("Q1", "P57"), ("Q2", "P58"), ("Q4", "P86")] {
        let objects: Vec<_> = kb.objects_for(s, p).iter().map(|o| o.as_str()).collect();
        println!(
            "({s}, {p}) -> {objects:?}  deterministic: {}",
            kb.is_deterministic(s, p)
        );
    }
    for p in ["P57", "P58", "P86"] {
        println!("{p} functional: {}", kb.is_functional(p));
    }
    let between: Vec<_> = kb.predicates_between("Q2", "Q1").iter().collect();
    println!("Q2 -> Q1 via {between:?}");

    let dir = tempfile::tempdir()?;
    kb.write_dir(dir.path())?;
    for f in ["triplets.tsv", "entities.tsv", "predicates.tsv"] {
        println!("--- {f}");
        print!("{}", std::fs::read_to_string(dir.path().join(f))?);
    }
    let back = KnowledgeBase::load_dir(dir.path())?;
    assert_eq!(back, kb);
    println!("reloaded: identical");
    Ok(())
}
