use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::HmmModel;
use crate::error::{Error, Result};
use crate::features::FeatureSequence;

fn draw<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // Rounding left u above the cumulative sum: take the last non-zero entry.
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// Ancestral sampling of `len` frames. Deterministic for a given seed.
pub fn sample_sequence(
    model: &HmmModel,
    len: usize,
    seed: u64,
    frame_shift_ms: f64,
) -> Result<(Vec<usize>, FeatureSequence)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_with_rng(model, len, &mut rng, frame_shift_ms)
}

pub fn sample_with_rng<R: Rng + ?Sized>(
    model: &HmmModel,
    len: usize,
    rng: &mut R,
    frame_shift_ms: f64,
) -> Result<(Vec<usize>, FeatureSequence)> {
    if len == 0 {
        return Err(Error::arg("cannot sample an empty sequence"));
    }
    let r = model.order();
    let topo = model.topology();
    let mut states = Vec::with_capacity(len);
    states.push(draw(model.initial(), rng));
    for t in 1..len {
        let ctx = &states[t.saturating_sub(r)..t];
        let tensor = model.tensor_for_context(ctx.len());
        let idx = tensor.context_index(ctx).expect("sampled paths are legal");
        let mv = draw(tensor.row(idx), rng);
        let next = topo.successor(states[t - 1], mv);
        states.push(next);
    }
    let mut data = Vec::with_capacity(len * model.dim());
    for &s in &states {
        data.extend(model.emissions().sample(s, rng));
    }
    let obs = FeatureSequence::from_flat(data, model.dim(), frame_shift_ms)?;
    Ok((states, obs))
}
