//! Baum-Welch on the composite lattice, segmental k-means initialisation and
//! the order 1 → 2 → 3 training chain.

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::inference::{backward, forward, EmissionTable};
use super::{CompositeLattice, GaussianMixtureEmission, HmmModel};
use crate::cluster::lbg;
use crate::error::{Error, Result};
use crate::features::FeatureSequence;
use crate::numeric::{column_moments, log_sum_exp, normalize_with_floor};

/// Smallest variance ever used, for corpora with a constant dimension.
pub const MIN_VARIANCE: f64 = 1e-8;

/// Floors and stopping rule for one Baum-Welch run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaumWelchOptions {
    pub max_iters: usize,
    /// Stop when the relative log-likelihood gain falls below this.
    pub tol: f64,
    pub transition_floor: f64,
    /// Variance floor as a fraction of the corpus's per-dimension variance.
    pub variance_floor_ratio: f64,
}

impl Default for BaumWelchOptions {
    fn default() -> Self {
        Self {
            max_iters: 10,
            tol: 1e-4,
            transition_floor: 1e-6,
            variance_floor_ratio: 1e-4,
        }
    }
}

/// Configuration of the full acoustic training chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HmmTrainConfig {
    pub num_states: usize,
    pub num_mixtures: usize,
    /// Final order of the chain, 1..=3.
    pub order: usize,
    pub baum_welch: BaumWelchOptions,
    pub seed: u64,
}

impl Default for HmmTrainConfig {
    fn default() -> Self {
        Self {
            num_states: 6,
            num_mixtures: 3,
            order: 3,
            baum_welch: BaumWelchOptions::default(),
            seed: 1,
        }
    }
}

impl HmmTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_states == 0 || self.num_mixtures == 0 {
            return Err(Error::config(
                "num_states and num_mixtures must be positive",
            ));
        }
        if !(1..=3).contains(&self.order) {
            return Err(Error::UnsupportedOrder(self.order));
        }
        let bw = &self.baum_welch;
        if !(bw.transition_floor >= 0.0 && bw.transition_floor < 0.5) {
            return Err(Error::config("transition_floor must lie in [0, 0.5)"));
        }
        if !(bw.variance_floor_ratio > 0.0) {
            return Err(Error::config("variance_floor_ratio must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: HmmModel,
    /// Total corpus log-likelihood of the input model followed by the value
    /// after every completed iteration.
    pub log_likelihoods: Vec<f64>,
}

/// Sufficient statistics of one or more utterances. `merge` is associative
/// and commutative up to floating-point summation order.
#[derive(Debug, Clone)]
struct Stats {
    log_likelihood: f64,
    initial: Vec<f64>,
    transitions: Vec<Vec<f64>>,
    /// Per component: occupancy, and first/second moments about the current
    /// component mean (shifted for numerical stability).
    occupancy: Vec<f64>,
    shifted_sum: Vec<f64>,
    shifted_sq: Vec<f64>,
}

impl Stats {
    fn zeros(model: &HmmModel) -> Self {
        let e = model.emissions();
        let nm = e.num_states() * e.num_mixtures();
        Self {
            log_likelihood: 0.0,
            initial: vec![0.0; model.num_states()],
            transitions: model
                .tensors()
                .iter()
                .map(|t| vec![0.0; t.as_flat().len()])
                .collect(),
            occupancy: vec![0.0; nm],
            shifted_sum: vec![0.0; nm * e.dim()],
            shifted_sq: vec![0.0; nm * e.dim()],
        }
    }

    fn merge(mut self, other: &Stats) -> Self {
        fn add(a: &mut [f64], b: &[f64]) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        self.log_likelihood += other.log_likelihood;
        add(&mut self.initial, &other.initial);
        for (a, b) in self.transitions.iter_mut().zip(&other.transitions) {
            add(a, b);
        }
        add(&mut self.occupancy, &other.occupancy);
        add(&mut self.shifted_sum, &other.shifted_sum);
        add(&mut self.shifted_sq, &other.shifted_sq);
        self
    }
}

fn e_step(model: &HmmModel, lattice: &CompositeLattice, obs: &FeatureSequence) -> Stats {
    let mut stats = Stats::zeros(model);
    let len = obs.num_frames();
    let n = model.num_states();
    let e = model.emissions();
    let (m, dim) = (e.num_mixtures(), e.dim());
    let emis = EmissionTable::new(model, obs);
    let alpha = forward(lattice, &emis, len);
    let beta = backward(lattice, &emis, len);
    let ll = log_sum_exp(&alpha[len - 1]);
    stats.log_likelihood = ll;

    for t in 0..len {
        let layer = lattice.layer(t);
        let mut state_post = vec![0.0; n];
        for c in 0..layer.len() {
            state_post[layer.last_state[c]] += (alpha[t][c] + beta[t][c] - ll).exp();
        }
        if t == 0 {
            stats.initial.copy_from_slice(&state_post);
        }
        if t + 1 < len {
            let counts = &mut stats.transitions[layer.context_len - 1];
            let b = model.topology().branching();
            for (c, arcs) in layer.arcs.iter().enumerate() {
                if alpha[t][c] == f64::NEG_INFINITY {
                    continue;
                }
                for arc in arcs {
                    let xi = (alpha[t][c]
                        + arc.log_prob
                        + emis.get(t + 1, arc.next_state)
                        + beta[t + 1][arc.target]
                        - ll)
                        .exp();
                    counts[c * b + arc.mv] += xi;
                }
            }
        }

        let x = obs.frame(t);
        let mut comp = vec![0.0; m];
        for (s, &post) in state_post.iter().enumerate() {
            if post <= 0.0 {
                continue;
            }
            e.component_log_densities(s, x, &mut comp);
            let total = emis.get(t, s);
            for (mix, &lc) in comp.iter().enumerate() {
                let resp = post * (lc - total).exp();
                if resp <= 0.0 {
                    continue;
                }
                let k = s * m + mix;
                stats.occupancy[k] += resp;
                let mean = e.mean(s, mix);
                let off = k * dim;
                for d in 0..dim {
                    let dev = x[d] - mean[d];
                    stats.shifted_sum[off + d] += resp * dev;
                    stats.shifted_sq[off + d] += resp * dev * dev;
                }
            }
        }
    }
    stats
}

fn m_step(model: &HmmModel, stats: &Stats, transition_floor: f64, var_floor: &[f64]) -> HmmModel {
    let mut next = model.clone();
    let (initial, tensors, emissions) = next.parts_mut();

    initial.copy_from_slice(&stats.initial);
    normalize_with_floor(initial, transition_floor);

    for (tensor, counts) in tensors.iter_mut().zip(&stats.transitions) {
        let b = tensor.branching();
        for (idx, row_counts) in counts.chunks_exact(b).enumerate() {
            // Contexts never visited keep their current row.
            if row_counts.iter().sum::<f64>() <= 0.0 {
                continue;
            }
            let row = tensor.row_mut(idx);
            row.copy_from_slice(row_counts);
            normalize_with_floor(row, transition_floor);
        }
    }

    let (m, dim) = (emissions.num_mixtures(), emissions.dim());
    for s in 0..emissions.num_states() {
        let occ_state: f64 = stats.occupancy[s * m..(s + 1) * m].iter().sum();
        if occ_state <= 0.0 {
            continue;
        }
        for mix in 0..m {
            let k = s * m + mix;
            let occ = stats.occupancy[k];
            let weight = occ / occ_state;
            if occ <= 1e-12 {
                emissions.set_weight(s, mix, weight);
                continue;
            }
            let old_mean = emissions.mean(s, mix).to_vec();
            let mut mean = vec![0.0; dim];
            let mut var = vec![0.0; dim];
            for d in 0..dim {
                let shift = stats.shifted_sum[k * dim + d] / occ;
                mean[d] = old_mean[d] + shift;
                var[d] = (stats.shifted_sq[k * dim + d] / occ - shift * shift).max(var_floor[d]);
            }
            emissions.set_component(s, mix, weight, &mean, &var);
        }
        // Renormalise away rounding so weights sum to one within an ulp.
        let total: f64 = emissions.weights(s).iter().sum();
        for mix in 0..m {
            let w = emissions.weights(s)[mix] / total;
            emissions.set_weight(s, mix, w);
        }
    }
    next
}

fn check_corpus(corpus: &[FeatureSequence], dim: usize) -> Result<()> {
    if corpus.is_empty() {
        return Err(Error::EmptyInput("training corpus"));
    }
    for seq in corpus {
        if seq.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: seq.dim(),
            });
        }
    }
    Ok(())
}

/// Per-dimension variance floor: `ratio ×` the pooled corpus variance, never
/// below [`MIN_VARIANCE`].
pub fn variance_floor(corpus: &[FeatureSequence], ratio: f64) -> Vec<f64> {
    let dim = corpus[0].dim();
    let (_, var, _) = column_moments(corpus.iter().flat_map(|s| s.frames()), dim);
    if var.iter().any(|&v| v * ratio < MIN_VARIANCE) {
        warn!("corpus has (near-)constant dimensions; variance floor clamped to {MIN_VARIANCE:e}");
    }
    var.iter().map(|v| (v * ratio).max(MIN_VARIANCE)).collect()
}

fn corpus_stats(model: &HmmModel, corpus: &[FeatureSequence]) -> Stats {
    let lattice = CompositeLattice::new(model);
    let parts: Vec<Stats> = corpus
        .par_iter()
        .map(|o| e_step(model, &lattice, o))
        .collect();
    // Sequential fold keeps the result independent of thread scheduling.
    parts
        .iter()
        .fold(Stats::zeros(model), |acc, s| acc.merge(s))
}

/// EM training on the composite lattice. `max_iters = 0` returns the input.
pub fn baum_welch_train(
    model: &HmmModel,
    corpus: &[FeatureSequence],
    opts: &BaumWelchOptions,
) -> Result<TrainOutcome> {
    check_corpus(corpus, model.dim())?;
    let var_floor = variance_floor(corpus, opts.variance_floor_ratio);
    let mut current = model.clone();
    let mut stats = corpus_stats(&current, corpus);
    let mut history = vec![stats.log_likelihood];
    for _ in 0..opts.max_iters {
        let candidate = m_step(&current, &stats, opts.transition_floor, &var_floor);
        let candidate_stats = corpus_stats(&candidate, corpus);
        let prev = stats.log_likelihood;
        let now = candidate_stats.log_likelihood;
        current = candidate;
        stats = candidate_stats;
        history.push(now);
        if !now.is_finite() {
            return Err(Error::Numeric("log-likelihood became non-finite".into()));
        }
        if (now - prev) / prev.abs().max(f64::MIN_POSITIVE) < opts.tol {
            break;
        }
    }
    Ok(TrainOutcome {
        model: current,
        log_likelihoods: history,
    })
}

/// Order-1 starting model: frames are cut into `N` equal time slices per
/// utterance, each state's pool is clustered into `M` components with LBG,
/// and every component takes the pooled corpus variance.
pub fn initialize_model(
    corpus: &[FeatureSequence],
    num_states: usize,
    num_mixtures: usize,
    seed: u64,
    variance_floor_ratio: f64,
) -> Result<HmmModel> {
    if num_states == 0 || num_mixtures == 0 {
        return Err(Error::arg("num_states and num_mixtures must be positive"));
    }
    check_corpus(corpus, corpus.first().map(|s| s.dim()).unwrap_or(0))?;
    let dim = corpus[0].dim();
    let floor = variance_floor(corpus, variance_floor_ratio);
    let (global_mean, global_var, _) = column_moments(corpus.iter().flat_map(|s| s.frames()), dim);
    let variance: Vec<f64> = global_var
        .iter()
        .zip(&floor)
        .map(|(v, f)| v.max(*f))
        .collect();

    let mut pools: Vec<Vec<&[f64]>> = vec![Vec::new(); num_states];
    for seq in corpus {
        let len = seq.num_frames();
        for (t, frame) in seq.frames().enumerate() {
            pools[t * num_states / len].push(frame);
        }
    }

    let mut weights = Vec::with_capacity(num_states * num_mixtures);
    let mut means = Vec::with_capacity(num_states * num_mixtures * dim);
    for (s, pool) in pools.iter().enumerate() {
        let state_seed = seed ^ (s as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
        if pool.len() >= num_mixtures {
            let book = lbg(pool, num_mixtures, state_seed)?;
            let mut counts = vec![0usize; num_mixtures];
            for &a in &book.assignments {
                counts[a] += 1;
            }
            let total = (pool.len() + num_mixtures) as f64;
            weights.extend(counts.iter().map(|&c| (c as f64 + 1.0) / total));
            for c in &book.centroids {
                means.extend_from_slice(c);
            }
        } else {
            // Too few frames to cluster: spread components around the pool
            // (or global) mean so they do not stay tied under EM.
            let centre = if pool.is_empty() {
                global_mean.clone()
            } else {
                column_moments(pool.iter().copied(), dim).0
            };
            for mix in 0..num_mixtures {
                weights.push(1.0 / num_mixtures as f64);
                let offset = mix as f64 - (num_mixtures as f64 - 1.0) / 2.0;
                means.extend(
                    centre
                        .iter()
                        .zip(&variance)
                        .map(|(c, v)| c + 0.1 * offset * v.sqrt()),
                );
            }
        }
    }
    let emissions = GaussianMixtureEmission::new(
        num_states,
        num_mixtures,
        dim,
        weights,
        means,
        variance.repeat(num_states * num_mixtures),
    )?;
    HmmModel::uniform(1, emissions)
}

#[derive(Debug, Clone)]
pub struct ChainOutcome {
    pub model: HmmModel,
    /// Log-likelihood trace of each order stage, in order.
    pub stage_log_likelihoods: Vec<Vec<f64>>,
}

/// Trains order 1, promotes, trains order 2, promotes, trains order 3 (or
/// stops at `cfg.order`).
pub fn train_circular_chain(
    corpus: &[FeatureSequence],
    cfg: &HmmTrainConfig,
) -> Result<ChainOutcome> {
    cfg.validate()?;
    let mut model = initialize_model(
        corpus,
        cfg.num_states,
        cfg.num_mixtures,
        cfg.seed,
        cfg.baum_welch.variance_floor_ratio,
    )?;
    let mut stages = Vec::with_capacity(cfg.order);
    loop {
        let out = baum_welch_train(&model, corpus, &cfg.baum_welch)?;
        model = out.model;
        stages.push(out.log_likelihoods);
        if model.order() >= cfg.order {
            break;
        }
        model = model.promote_order()?;
    }
    Ok(ChainOutcome {
        model,
        stage_log_likelihoods: stages,
    })
}
