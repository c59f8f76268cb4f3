use super::{CompositeLattice, HmmModel};
use crate::error::{Error, Result};
use crate::features::FeatureSequence;
use crate::numeric::{log_add, log_sum_exp};

/// `T × N` matrix of `log b_s(O_t)`, row-major.
pub(crate) struct EmissionTable {
    pub num_states: usize,
    pub values: Vec<f64>,
}

impl EmissionTable {
    pub fn new(model: &HmmModel, obs: &FeatureSequence) -> Self {
        let n = model.num_states();
        let e = model.emissions();
        let mut values = Vec::with_capacity(obs.num_frames() * n);
        for frame in obs.frames() {
            for s in 0..n {
                values.push(e.log_density(s, frame));
            }
        }
        Self {
            num_states: n,
            values,
        }
    }

    #[inline]
    pub fn get(&self, t: usize, s: usize) -> f64 {
        self.values[t * self.num_states + s]
    }
}

/// Log-space forward variables, one vector per frame over that frame's layer.
pub(crate) fn forward(
    lattice: &CompositeLattice,
    emis: &EmissionTable,
    len: usize,
) -> Vec<Vec<f64>> {
    let mut alpha = Vec::with_capacity(len);
    let first = lattice.layer(0);
    alpha.push(
        (0..first.len())
            .map(|c| lattice.log_initial()[c] + emis.get(0, first.last_state[c]))
            .collect::<Vec<f64>>(),
    );
    for t in 1..len {
        let src = lattice.layer(t - 1);
        let dst = lattice.layer(t);
        let mut next = vec![f64::NEG_INFINITY; dst.len()];
        let prev = &alpha[t - 1];
        for (c, arcs) in src.arcs.iter().enumerate() {
            if prev[c] == f64::NEG_INFINITY {
                continue;
            }
            for arc in arcs {
                next[arc.target] = log_add(next[arc.target], prev[c] + arc.log_prob);
            }
        }
        for (c, v) in next.iter_mut().enumerate() {
            *v += emis.get(t, dst.last_state[c]);
        }
        alpha.push(next);
    }
    alpha
}

pub(crate) fn backward(
    lattice: &CompositeLattice,
    emis: &EmissionTable,
    len: usize,
) -> Vec<Vec<f64>> {
    let mut beta = vec![Vec::new(); len];
    beta[len - 1] = vec![0.0; lattice.layer(len - 1).len()];
    for t in (0..len - 1).rev() {
        let src = lattice.layer(t);
        let next = &beta[t + 1];
        let cur: Vec<f64> = src
            .arcs
            .iter()
            .map(|arcs| {
                arcs.iter().fold(f64::NEG_INFINITY, |acc, arc| {
                    log_add(
                        acc,
                        arc.log_prob + emis.get(t + 1, arc.next_state) + next[arc.target],
                    )
                })
            })
            .collect();
        beta[t] = cur;
    }
    beta
}

/// `log P(O | λ)`, summed over all legal state paths.
pub fn forward_log_likelihood(model: &HmmModel, observations: &FeatureSequence) -> Result<f64> {
    model.check_observations(observations)?;
    let lattice = CompositeLattice::new(model);
    let emis = EmissionTable::new(model, observations);
    let alpha = forward(&lattice, &emis, observations.num_frames());
    Ok(log_sum_exp(alpha.last().unwrap()))
}

/// Most likely state path and its joint log-probability.
///
/// Ties are broken towards the lowest composite-state index, both among
/// predecessors and at the final frame.
pub fn viterbi_align(
    model: &HmmModel,
    observations: &FeatureSequence,
) -> Result<(Vec<usize>, f64)> {
    model.check_observations(observations)?;
    let lattice = CompositeLattice::new(model);
    let emis = EmissionTable::new(model, observations);
    let len = observations.num_frames();

    let first = lattice.layer(0);
    let mut delta: Vec<f64> = (0..first.len())
        .map(|c| lattice.log_initial()[c] + emis.get(0, first.last_state[c]))
        .collect();
    let mut back: Vec<Vec<usize>> = Vec::with_capacity(len);
    back.push(Vec::new());
    for t in 1..len {
        let src = lattice.layer(t - 1);
        let dst = lattice.layer(t);
        let mut best = vec![f64::NEG_INFINITY; dst.len()];
        let mut arg = vec![usize::MAX; dst.len()];
        for (c, arcs) in src.arcs.iter().enumerate() {
            for arc in arcs {
                let score = delta[c] + arc.log_prob;
                // Sources are visited in ascending order, so strict `>` keeps
                // the lowest index on ties.
                if arg[arc.target] == usize::MAX || score > best[arc.target] {
                    best[arc.target] = score;
                    arg[arc.target] = c;
                }
            }
        }
        for (c, v) in best.iter_mut().enumerate() {
            *v += emis.get(t, dst.last_state[c]);
        }
        delta = best;
        back.push(arg);
    }

    let mut end = 0;
    for (c, &v) in delta.iter().enumerate() {
        if v > delta[end] {
            end = c;
        }
    }
    let score = delta[end];
    if score == f64::NEG_INFINITY {
        return Err(Error::Numeric("no path has positive probability".into()));
    }
    let mut composite = vec![0; len];
    composite[len - 1] = end;
    for t in (1..len).rev() {
        composite[t - 1] = back[t][composite[t]];
    }
    Ok((lattice.to_states(&composite), score))
}
