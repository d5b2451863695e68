//! Train the toy model with all three objectives on a synthetic N-1 world and
//! measure, on held-out paragraphs, how often the keep-clues input gives the
//! object more probability than the mask-clues input, and how often the clue
//! classifier names the right variant.
//!
//! ```bash
//! cargo run --release --example clue_objectives -- [steps] [log.jsonl]
//! ```

use std::time::Instant;

use detmask::align::{build_dataset, AlignOptions};
use detmask::masking::MaskScheme;
use detmask::model::{train, ModelConfig, TrainOptions};
use detmask::pipeline::{evaluate_triples, mask_dataset, training_examples, vocabulary_for, MaskPlan, Objective};
use detmask::synth::{n1_world, WorldOptions};

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let steps: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(2000);
    let mut log = args.next().map(std::fs::File::create).transpose()?;

    let world = n1_world(7, WorldOptions::default());
    let opts = AlignOptions::default();
    let train_set = build_dataset(world.corpus.iter().cloned().map(Ok), &world.kb, &opts);
    let held_set = build_dataset(world.heldout.iter().cloned().map(Ok), &world.kb, &opts);
    let vocab = vocabulary_for(world.corpus.iter().map(|p| p.text.as_str()));

    let plan = MaskPlan { scheme: MaskScheme::Deterministic, objective: Objective::ConCls, seed: 7, max_len: 40 };
    let (train_records, counters) = mask_dataset(&train_set.deterministic, &vocab, &plan);
    let (held_records, _) = mask_dataset(&held_set.deterministic, &vocab, &plan);
    println!("vocab {}, masking {counters:?}", vocab.len());
    let train_ex = training_examples(train_records)?;
    let held_ex = training_examples(held_records)?;

    let t = Instant::now();
    let cfg = ModelConfig::new(vocab.len(), 32, 40, 7);
    let state = train(cfg, &train_ex, TrainOptions { steps, lr: 0.1, batch_size: 16 }, log.as_mut().map(|f| f as &mut dyn std::io::Write))?;
    println!("{steps} steps in {:.1?}", t.elapsed());

    for (name, ex) in [("train", &train_ex), ("held-out", &held_ex)] {
        let e = evaluate_triples(&state, ex)?;
        println!(
            "{name:<9} keep > drop {:.1}%  classifier {:.1}%",
            100.0 * e.contrastive_rate(),
            100.0 * e.classification_accuracy()
        );
    }
    Ok(())
}
