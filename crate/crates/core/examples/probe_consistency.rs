//! Pretrain with plain MLM under two masking schemes and compare how
//! consistently each model answers paraphrased cloze prompts.
//!
//! ```bash
//! cargo run --release --example probe_consistency -- [steps] [seed]
//! ```

use std::time::Instant;

use detmask::align::{build_dataset, AlignOptions};
use detmask::masking::MaskScheme;
use detmask::model::{train, ModelConfig, TrainOptions};
use detmask::pipeline::{mask_dataset, training_examples, vocabulary_for, MaskPlan, Objective};
use detmask::probe::{evaluate, filter_leakage, instantiate_all, predict_all, split_questions};
use detmask::synth::{n1_world, WorldOptions};

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let steps: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(3000);
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(1);

    let world = n1_world(seed, WorldOptions::default());
    let data = build_dataset(world.corpus.iter().cloned().map(Ok), &world.kb, &AlignOptions::default());
    let vocab = vocabulary_for(world.corpus.iter().map(|p| p.text.as_str()));

    // facts seen in pretraining are in-domain
    let mut facts = world.facts.clone();
    let seen = data.deterministic.iter().flat_map(|s| s.aligned.iter().map(|t| t.triplet.clone())).collect();
    split_questions(&mut facts, &world.kb, &seen);
    let (questions, dropped) = filter_leakage(instantiate_all(&world.templates, &facts)?);
    println!("{} facts, {} questions, {} dropped for leakage", facts.len(), questions.len(), dropped.len());

    for scheme in [MaskScheme::Deterministic, MaskScheme::RandomToken] {
        let t = Instant::now();
        let plan = MaskPlan { scheme, objective: Objective::Mlm, seed, max_len: 40 };
        let (records, _) = mask_dataset(&data.deterministic, &vocab, &plan);
        let examples = training_examples(records)?;
        let cfg = ModelConfig::new(vocab.len(), 32, 40, seed).with_lambdas(0.0, 0.0);
        let state = train(cfg, &examples, TrainOptions { steps, lr: 0.1, batch_size: 16 }, None)?;
        let preds = predict_all(&state, &vocab, &questions)?;
        let r = evaluate(&questions, &preds, &facts)?;
        println!(
            "{:<14} acc {:5.1}  consis {:5.1}  joint {:5.1}  ({:.1?})",
            scheme.name(),
            100.0 * r.accuracy(),
            100.0 * r.consistency(),
            100.0 * r.joint(),
            t.elapsed()
        );
    }
    Ok(())
}
