//! Test-only oracles: random model generation and exhaustive path
//! enumeration computed straight from model parameters.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use suprahmm_core::features::FeatureSequence;
use suprahmm_core::hmm::{CircularTopology, GaussianMixtureEmission, HmmModel, TransitionTensor};

fn random_simplex(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 0.05).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|v| v / total).collect()
}

pub fn random_model(seed: u64, n: usize, m: usize, d: usize, order: usize) -> HmmModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let topo = CircularTopology::new(n).unwrap();
    let tensors = (1..=order)
        .map(|k| {
            let template = TransitionTensor::uniform(topo, k).unwrap();
            let b = topo.branching();
            let probs: Vec<f64> = (0..template.num_contexts())
                .flat_map(|_| random_simplex(&mut rng, b))
                .collect();
            TransitionTensor::from_rows(topo, k, probs).unwrap()
        })
        .collect();
    let weights: Vec<f64> = (0..n).flat_map(|_| random_simplex(&mut rng, m)).collect();
    let means: Vec<f64> = (0..n * m * d)
        .map(|_| rng.random_range(-2.0..2.0))
        .collect();
    let vars: Vec<f64> = (0..n * m * d).map(|_| rng.random_range(0.3..2.0)).collect();
    let emissions = GaussianMixtureEmission::new(n, m, d, weights, means, vars).unwrap();
    HmmModel::new(random_simplex(&mut rng, n), tensors, emissions).unwrap()
}

pub fn random_observations(seed: u64, t: usize, d: usize) -> FeatureSequence {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcdef);
    let data = (0..t * d).map(|_| rng.random_range(-3.0..3.0)).collect();
    FeatureSequence::from_flat(data, d, 10.0).unwrap()
}

/// Mixture density evaluated directly from the parameters.
pub fn oracle_emission(model: &HmmModel, state: usize, x: &[f64]) -> f64 {
    let e = model.emissions();
    (0..e.num_mixtures())
        .map(|m| {
            let mut dens = e.weights(state)[m];
            for ((xi, mu), var) in x.iter().zip(e.mean(state, m)).zip(e.variance(state, m)) {
                dens *= (-(xi - mu).powi(2) / (2.0 * var)).exp()
                    / (2.0 * std::f64::consts::PI * var).sqrt();
            }
            dens
        })
        .sum()
}

/// Probability of a path from the initial vector and tensor lookups; 0 if
/// any step is illegal.
pub fn oracle_path_prob(model: &HmmModel, path: &[usize]) -> f64 {
    let r = model.order();
    let mut p = model.initial()[path[0]];
    for t in 1..path.len() {
        let ctx = &path[t.saturating_sub(r)..t];
        p *= model.tensors()[ctx.len() - 1].prob(ctx, path[t]);
    }
    p
}

/// Every state path of length `t` over `n` states (legal or not).
pub fn all_paths(n: usize, t: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..t {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..n).map(move |s| {
                    let mut q = p.clone();
                    q.push(s);
                    q
                })
            })
            .collect();
    }
    out
}

/// Log joint probability of each path, `-inf` for illegal ones.
pub fn oracle_path_log_joint(model: &HmmModel, obs: &FeatureSequence, path: &[usize]) -> f64 {
    let mut lp = oracle_path_prob(model, path).ln();
    for (t, &s) in path.iter().enumerate() {
        lp += oracle_emission(model, s, obs.frame(t)).ln();
    }
    lp
}

/// `log Σ_Q P(Q, O)` by enumeration.
pub fn oracle_log_likelihood(model: &HmmModel, obs: &FeatureSequence) -> f64 {
    let scores: Vec<f64> = all_paths(model.num_states(), obs.num_frames())
        .iter()
        .map(|p| oracle_path_log_joint(model, obs, p))
        .collect();
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + scores.iter().map(|s| (s - max).exp()).sum::<f64>().ln()
}

/// Exhaustive argmax path; enumeration is lexicographic and strict `>` keeps
/// the first maximiser.
pub fn oracle_best_path(model: &HmmModel, obs: &FeatureSequence) -> (Vec<usize>, f64) {
    let mut best = (Vec::new(), f64::NEG_INFINITY);
    for p in all_paths(model.num_states(), obs.num_frames()) {
        let s = oracle_path_log_joint(model, obs, &p);
        if s > best.1 {
            best = (p, s);
        }
    }
    best
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}
