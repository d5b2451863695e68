//! Show every masking scheme, and the keep/mask-clues/mask-random triple, on
//! one aligned sentence.
//!
//! ```bash
//! cargo run --example masking_schemes
//! ```

use detmask::align::{Aligner, Paragraph};
use detmask::kb::KbBuilder;
use detmask::masking::{
    apply_mask, make_classification_triple, sample_rng, samples_from_aligned, MaskScheme, MaskedSample,
    Role, Vocabulary,
};

fn render(vocab: &Vocabulary, m: &MaskedSample) -> String {
    m.input_ids.iter().map(|&id| vocab.token(id)).collect::<Vec<_>>().join(" ")
}

fn main() -> anyhow::Result<()> {
    let kb = KbBuilder::new()
        .entity("Q1", "War Horse", &[])?
        .entity("Q2", "Steven Spielberg", &[])?
        .entity("Q5", "World War I", &[])?
        .predicate("P57", &["directed by"])?
        .triplet("Q1", "P57", "Q2")?
        .build()?;
    let text = "War Horse is a 2011 war film set in World War I and directed by Steven Spielberg.";
    let sample = Aligner::new(&kb).align_paragraph(&Paragraph::new("ex", text));
    let vocab = Vocabulary::build([text], 1);
    let tokenized = samples_from_aligned(&sample, &vocab).remove(0);

    let roles: Vec<String> = tokenized
        .tokens
        .iter()
        .zip(&tokenized.roles)
        .map(|(&t, r)| match r {
            Role::Other => vocab.token(t).to_string(),
            r => format!("{}/{r:?}", vocab.token(t)),
        })
        .collect();
    println!("roles: {}\n", roles.join(" "));

    for scheme in MaskScheme::ALL {
        match apply_mask(&tokenized, scheme, &mut sample_rng(42, 0)) {
            Ok(m) => println!("{:<14} {}", scheme.name(), render(&vocab, &m)),
            Err(e) => println!("{:<14} ({e})", scheme.name()),
        }
    }

    println!();
    let triple = make_classification_triple(&tokenized, &mut sample_rng(42, 0))?;
    for m in &triple {
        println!("{:<14} {}  ({} masks)", format!("{:?}", m.variant), render(&vocab, m), m.mask_positions.len());
    }
    Ok(())
}
