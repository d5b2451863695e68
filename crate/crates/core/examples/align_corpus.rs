//! Align a handful of paragraphs with a knowledge base and print what each
//! paragraph contributes to the deterministic dataset.
//!
//! ```bash
//! cargo run --example align_corpus
//! ```

use detmask::align::{build_dataset, compute_stats, AlignOptions, LinkedSpan, Paragraph};
use detmask::kb::{EntityId, KbBuilder};

fn main() -> anyhow::Result<()> {
    let kb = KbBuilder::new()
        .entity("Q1", "War Horse", &[])?
        .entity("Q2", "Steven Spielberg", &["Spielberg"])?
        .entity("Q3", "Jaws", &[])?
        .entity("Q4", "John Williams", &[])?
        .predicate("P57", &["directed by"])?
        .predicate("P58", &["director of"])?
        .predicate("P86", &["composed by"])?
        .triplet("Q1", "P57", "Q2")?
        .triplet("Q3", "P57", "Q2")?
        .triplet("Q2", "P58", "Q1")?
        .triplet("Q2", "P58", "Q3")?
        .triplet("Q3", "P86", "Q4")?
        .build()?;

    let corpus = vec![
        // (War Horse, directed by, Spielberg) is deterministic; the reverse
        // relation has two objects and is only counted
        Paragraph::new("p1", "War Horse, a 2011 drama, was directed by Steven Spielberg."),
        // one-character typo in the predicate still aligns
        Paragraph::new("p2", "The score of Jaws was composd by John Williams."),
        // entities present but no predicate evidence
        Paragraph::new("p3", "Jaws and John Williams appear together."),
        // externally linked spans bypass the dictionary linker
        Paragraph::new("p4", "The shark film, directed by the bearded one.").with_links(vec![
            LinkedSpan { start: 4, end: 14, entity: EntityId::new("Q3")? },
            LinkedSpan { start: 28, end: 43, entity: EntityId::new("Q2")? },
        ]),
    ];

    let d = build_dataset(corpus.into_iter().map(Ok), &kb, &AlignOptions::default());
    for s in &d.deterministic {
        println!("{}: {}", s.paragraph.doc_id, s.paragraph.text);
        for t in &s.aligned {
            println!(
                "  {} | S {:?} P {:?} (edit {}) O {:?}",
                t.triplet, t.subject_span.surface, t.predicate_span.surface, t.edit_distance, t.object_span.surface
            );
        }
    }
    println!("salient-span paragraphs: {}", d.salient.len());
    println!("{:?}", d.counters);
    println!("{}", compute_stats(&d.deterministic, &d.counters.candidates)?);
    Ok(())
}
