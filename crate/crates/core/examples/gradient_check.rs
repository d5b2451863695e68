//! Check the analytic gradient of each loss term against central differences
//! on a tiny model and real classification triples.
//!
//! ```bash
//! cargo run --release --example gradient_check
//! ```

use detmask::align::{build_dataset, AlignOptions};
use detmask::masking::{make_classification_triple, sample_rng, samples_from_aligned};
use detmask::model::{finite_diff_check, LossWeights, ModelConfig, ModelState, TrainingExample};
use detmask::pipeline::vocabulary_for;
use detmask::synth::{n1_world, WorldOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> anyhow::Result<()> {
    let world = n1_world(3, WorldOptions::default());
    let data = build_dataset(world.corpus.iter().take(20).cloned().map(Ok), &world.kb, &AlignOptions::default());
    let vocab = vocabulary_for(world.corpus.iter().map(|p| p.text.as_str()));

    let mut batch = Vec::new();
    for (i, s) in data.deterministic.iter().enumerate() {
        for t in samples_from_aligned(s, &vocab) {
            let Some(t) = t.crop(32) else { continue };
            if let Ok([keep, drop, randv]) = make_classification_triple(&t, &mut sample_rng(3, i as u64)) {
                batch.push(TrainingExample::triple(keep, drop, randv));
            }
        }
        if batch.len() == 3 {
            break;
        }
    }
    anyhow::ensure!(!batch.is_empty(), "no usable triples");

    let mut state = ModelState::init(ModelConfig::new(vocab.len(), 8, 32, 3))?;
    // a fresh init is nearly symmetric; perturb so every partial is non-trivial
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for (_, g) in state.params.groups_mut() {
        g.mapv_inplace(|x| x + rng.random_range(-0.5..0.5));
    }

    println!("{} triples, vocab {}", batch.len(), vocab.len());
    for (name, w) in [
        ("mlm", LossWeights::MLM),
        ("con", LossWeights::CON),
        ("cls", LossWeights::CLS),
        ("total", LossWeights::total(1.0, 1.0)),
    ] {
        let g = finite_diff_check(&state, &batch, 1e-5, w, 0)?;
        println!(
            "{name:<6} max rel error {:.2e} over {} coords in {} groups (worst {}[{}])",
            g.max_rel_error, g.coordinates, g.groups_covered, g.worst.0, g.worst.1
        );
    }
    Ok(())
}
