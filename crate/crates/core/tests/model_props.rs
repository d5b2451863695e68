use detmask::align::{build_dataset, AlignOptions};
use detmask::masking::{MaskScheme, MaskedSample, Variant, MASK_ID};
use detmask::model::{
    finite_diff_check, load_checkpoint, save_checkpoint, train, LossWeights, ModelConfig, ModelState,
    TrainOptions, TrainingExample,
};
use detmask::pipeline::{mask_dataset, training_examples, vocabulary_for, MaskPlan, Objective};
use detmask::synth::{n1_world, WorldOptions};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const VOCAB: usize = 20;

fn masked(ids: &[u32], positions: &[usize], variant: Variant) -> MaskedSample {
    let mut input_ids = ids.to_vec();
    let targets = positions.iter().map(|&p| std::mem::replace(&mut input_ids[p], MASK_ID)).collect();
    MaskedSample {
        doc_id: "d".into(),
        scheme: MaskScheme::Deterministic,
        variant,
        input_ids,
        mask_positions: positions.to_vec(),
        targets,
    }
}

/// Random triple over `n` tokens: object at 0..k, clues next, random from the tail.
fn random_triple(rng: &mut ChaCha8Rng) -> TrainingExample {
    let n = rng.random_range(6..12);
    let ids: Vec<u32> = (0..n).map(|_| rng.random_range(3..VOCAB as u32)).collect();
    let k = rng.random_range(1..3);
    let c = rng.random_range(1..3);
    let obj: Vec<usize> = (0..k).collect();
    let oc: Vec<usize> = (0..k + c).collect();
    let orand: Vec<usize> = obj.iter().copied().chain(n - c..n).collect();
    TrainingExample::triple(
        masked(&ids, &obj, Variant::KeepClues),
        masked(&ids, &oc, Variant::MaskClues),
        masked(&ids, &orand, Variant::MaskRandom),
    )
}

fn random_state(seed: u64) -> ModelState {
    let mut s = ModelState::init(ModelConfig::new(VOCAB, 8, 16, seed)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (_, g) in s.params.groups_mut() {
        g.mapv_inplace(|x| x + rng.random_range(-0.3..0.3));
    }
    s
}

fn swap_inputs(ex: &TrainingExample) -> TrainingExample {
    let TrainingExample::Triple { keep, drop, randv } = ex else { unreachable!() };
    let keep2 = MaskedSample { input_ids: drop.input_ids.clone(), ..keep.clone() };
    let drop2 = MaskedSample { input_ids: keep.input_ids.clone(), ..drop.clone() };
    TrainingExample::triple(keep2, drop2, randv.clone())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn con_is_antisymmetric(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let state = random_state(seed);
        let batch: Vec<_> = (0..3).map(|_| random_triple(&mut rng)).collect();
        let swapped: Vec<_> = batch.iter().map(swap_inputs).collect();
        let a = state.losses(&batch).unwrap().con;
        let b = state.losses(&swapped).unwrap().con;
        prop_assert!((a + b).abs() <= 1e-12, "{} vs {}", a, b);
    }

    #[test]
    fn distributions_normalized(seed in any::<u64>(), len in 1usize..16) {
        let state = random_state(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let ids: Vec<u32> = (0..len).map(|_| rng.random_range(0..VOCAB as u32)).collect();
        let out = state.forward(&ids).unwrap();
        prop_assert_eq!(out.embeddings.dim(), (len, 8));
        for row in out.probs.rows() {
            prop_assert!((row.sum() - 1.0).abs() < 1e-9);
            prop_assert!(row.iter().all(|p| *p >= 0.0));
        }
        for pos in 0..len {
            let c = state.classifier_probs(&out, pos);
            prop_assert!((c.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn gradients_match_finite_differences(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let state = random_state(seed);
        let batch: Vec<_> = (0..2).map(|_| random_triple(&mut rng)).collect();
        for w in [LossWeights::MLM, LossWeights::CON, LossWeights::CLS, LossWeights::total(1.0, 1.0)] {
            let g = finite_diff_check(&state, &batch, 1e-5, w, seed).unwrap();
            prop_assert!(g.max_rel_error < 1e-4, "{:?}: {:?}", w, g);
        }
    }
}

fn world_examples(objective: Objective) -> (usize, Vec<TrainingExample>) {
    let w = n1_world(2, WorldOptions { paragraphs: 80, heldout_paragraphs: 0, ..Default::default() });
    let d = build_dataset(w.corpus.iter().cloned().map(Ok), &w.kb, &AlignOptions::default());
    let vocab = vocabulary_for(w.corpus.iter().map(|p| p.text.as_str()));
    let plan = MaskPlan { scheme: MaskScheme::Deterministic, objective, seed: 2, max_len: 40 };
    let (records, _) = mask_dataset(&d.deterministic, &vocab, &plan);
    (vocab.len(), training_examples(records).unwrap())
}

#[test]
fn zero_learning_rate_is_identity() {
    let (v, ex) = world_examples(Objective::ConCls);
    let cfg = ModelConfig::new(v, 8, 40, 3);
    let init = ModelState::init(cfg.clone()).unwrap();
    let trained = train(cfg, &ex, TrainOptions { steps: 5, lr: 0.0, batch_size: 4 }, None).unwrap();
    assert_eq!(trained.params, init.params);
}

#[test]
fn training_is_deterministic_and_logged() {
    let (v, ex) = world_examples(Objective::ConCls);
    let cfg = ModelConfig::new(v, 8, 40, 4);
    let opts = TrainOptions { steps: 20, lr: 0.1, batch_size: 4 };
    let mut log = Vec::new();
    let a = train(cfg.clone(), &ex, opts, Some(&mut log)).unwrap();
    let b = train(cfg, &ex, opts, None).unwrap();
    assert_eq!(a.params, b.params);
    let lines: Vec<serde_json::Value> = String::from_utf8(log)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 20);
    for key in ["step", "L_mlm", "L_con", "L_cls", "L_total"] {
        assert!(lines[0].get(key).is_some(), "missing {key}");
    }
}

#[test]
fn mlm_training_reduces_loss() {
    let (v, ex) = world_examples(Objective::Mlm);
    let cfg = ModelConfig::new(v, 16, 40, 5).with_lambdas(0.0, 0.0);
    let before = ModelState::init(cfg.clone()).unwrap().losses(&ex).unwrap().mlm;
    let state = train(cfg, &ex, TrainOptions { steps: 300, lr: 0.1, batch_size: 16 }, None).unwrap();
    let after = state.losses(&ex).unwrap().mlm;
    assert!(after < 0.8 * before, "{before} -> {after}");
}

#[test]
fn checkpoint_file_round_trip() {
    let w = n1_world(1, WorldOptions { paragraphs: 10, heldout_paragraphs: 0, ..Default::default() });
    let vocab = vocabulary_for(w.corpus.iter().map(|p| p.text.as_str()));
    let state = ModelState::init(ModelConfig::new(vocab.len(), 8, 16, 9)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    save_checkpoint(&path, &state, &vocab).unwrap();
    let (back, v2) = load_checkpoint(&path).unwrap();
    assert_eq!(back.params, state.params);
    assert_eq!(back.config, state.config);
    assert_eq!(v2.tokens(), vocab.tokens());
}
