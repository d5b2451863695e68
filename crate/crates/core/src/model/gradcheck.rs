use rand::seq::index::sample as sample_indices;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::loss::{self, LossWeights, TrainingExample};
use super::{ModelError, ModelState};

/// Coordinates sampled per check, or every parameter if there are fewer.
/// Small groups contribute all of theirs and larger groups cover the rest.
pub const CHECK_COORDS: usize = 200;

/// Denominator floor for the relative error, so that partials that are zero
/// up to rounding do not dominate the maximum.
pub const REL_ERROR_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub max_rel_error: f64,
    pub coordinates: usize,
    /// Group and flat index of the worst coordinate.
    pub worst: (&'static str, usize),
    pub groups_covered: usize,
}

/// Splits `total` over groups as evenly as sizes allow, smallest group first,
/// so the sum is `min(total, sum(sizes))` and every non-empty group gets one.
fn group_quota(sizes: &[usize], total: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by_key(|&g| (sizes[g], g));
    let mut quota = vec![0; sizes.len()];
    let mut left = total;
    for (k, &g) in order.iter().enumerate() {
        let share = left.div_ceil(sizes.len() - k);
        quota[g] = share.min(sizes[g]);
        left -= quota[g];
    }
    quota
}

/// Compares analytic partials of `weights · losses` against central
/// differences on a seeded sample of coordinates from every group.
pub fn finite_diff_check(
    state: &ModelState,
    batch: &[TrainingExample],
    eps: f64,
    weights: LossWeights,
    seed: u64,
) -> Result<GradCheck, ModelError> {
    if !(eps > 0.0 && eps <= 1e-3) {
        return Err(ModelError::BadEpsilon(eps));
    }
    let (_, grads) = state.grad_weighted(batch, weights)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let groups = state.params.groups();
    let quota = group_quota(&groups.iter().map(|(_, t)| t.len()).collect::<Vec<_>>(), CHECK_COORDS);
    let mut picks: Vec<(usize, usize)> = Vec::new();
    for (g, (_, t)) in groups.iter().enumerate() {
        picks.extend(sample_indices(&mut rng, t.len(), quota[g]).into_iter().map(|i| (g, i)));
    }
    let grad_groups = grads.groups();

    let mut probe = state.clone();
    let set = |probe: &mut ModelState, g: usize, i: usize, x: f64| {
        let (_, t) = &mut probe.params.groups_mut()[g];
        t.as_slice_mut().expect("standard layout")[i] = x;
    };
    let total = |probe: &ModelState| -> Result<f64, ModelError> {
        Ok(loss::evaluate(probe, batch, weights, false)?.0.total)
    };

    let mut out = GradCheck {
        max_rel_error: 0.0,
        coordinates: picks.len(),
        worst: ("", 0),
        groups_covered: picks
            .iter()
            .map(|&(g, _)| g)
            .collect::<std::collections::BTreeSet<_>>()
            .len(),
    };
    for (g, i) in picks {
        let x0 = groups[g].1.as_slice().expect("standard layout")[i];
        set(&mut probe, g, i, x0 + eps);
        let plus = total(&probe)?;
        set(&mut probe, g, i, x0 - eps);
        let minus = total(&probe)?;
        set(&mut probe, g, i, x0);
        let numeric = (plus - minus) / (2.0 * eps);
        let analytic = grad_groups[g].1.as_slice().expect("standard layout")[i];
        let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR);
        if rel > out.max_rel_error || out.worst.0.is_empty() {
            out.max_rel_error = out.max_rel_error.max(rel);
            out.worst = (groups[g].0, i);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::masking::{MaskScheme, MaskedSample, Variant, MASK_ID, PAD_ID};
    use crate::model::ModelConfig;
    use rand::Rng;

    fn masked(ids: &[u32], positions: &[usize], variant: Variant) -> MaskedSample {
        let mut input_ids = ids.to_vec();
        let targets = positions
            .iter()
            .map(|&p| std::mem::replace(&mut input_ids[p], MASK_ID))
            .collect();
        MaskedSample {
            doc_id: "g".into(),
            scheme: MaskScheme::Deterministic,
            variant,
            input_ids,
            mask_positions: positions.to_vec(),
            targets,
        }
    }

    fn rough_state() -> ModelState {
        let mut s = ModelState::init(ModelConfig::new(10, 4, 8, 1)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for (_, t) in s.params.groups_mut() {
            t.iter_mut().for_each(|x| *x = rng.random_range(-0.5..0.5));
        }
        s
    }

    #[test]
    fn analytic_matches_numeric() {
        let s = rough_state();
        let ids = [3, 4, 5, 6, 7, 8, PAD_ID];
        let batch = vec![
            TrainingExample::triple(
                masked(&ids, &[4, 5], Variant::KeepClues),
                masked(&ids, &[0, 1, 4, 5], Variant::MaskClues),
                masked(&ids, &[2, 3, 4, 5], Variant::MaskRandom),
            ),
            TrainingExample::Plain(masked(&[9, 3, 4], &[1], Variant::Plain)),
        ];
        for w in [LossWeights::MLM, LossWeights::CON, LossWeights::CLS, LossWeights::total(1.0, 1.0)] {
            let r = finite_diff_check(&s, &batch, 1e-5, w, 0).unwrap();
            let n: usize = s.params.groups().iter().map(|(_, t)| t.len()).sum();
            assert_eq!(r.coordinates, CHECK_COORDS.min(n));
            assert_eq!(r.groups_covered, crate::model::N_GROUPS);
            assert!(r.max_rel_error < 1e-4, "{w:?}: {r:?}");
        }
    }

    #[test]
    fn quota_fills_from_larger_groups() {
        assert_eq!(group_quota(&[4, 100, 2, 100], 20), [4, 7, 2, 7]);
        assert_eq!(group_quota(&[3, 3], 200), [3, 3]);
        assert_eq!(group_quota(&[10, 10, 10], 7), [3, 2, 2]);
    }

    #[test]
    fn rejects_bad_eps() {
        let s = rough_state();
        assert!(matches!(
            finite_diff_check(&s, &[], 0.0, LossWeights::MLM, 0),
            Err(ModelError::BadEpsilon(_))
        ));
    }
}
