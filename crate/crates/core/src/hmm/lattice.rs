use super::HmmModel;
use crate::numeric::safe_ln;

/// One legal move out of a composite state.
#[derive(Debug, Clone, Copy)]
pub struct LatticeArc {
    /// Index in the next layer.
    pub target: usize,
    /// Conventional state entered.
    pub next_state: usize,
    /// Successor slot in the source tensor row (0 = stay, 1 = advance).
    pub mv: usize,
    pub log_prob: f64,
}

#[derive(Debug, Clone)]
pub struct LatticeLayer {
    /// Context length of the composite states in this layer.
    pub context_len: usize,
    pub last_state: Vec<usize>,
    pub arcs: Vec<Vec<LatticeArc>>,
}

impl LatticeLayer {
    pub fn len(&self) -> usize {
        self.last_state.len()
    }

    pub fn is_empty(&self) -> bool {
        self.last_state.is_empty()
    }
}

/// First-order view of an order-`r` model whose states are legal context
/// tuples. Layer `L` (1-based) holds contexts of `L` states; frame `t`
/// (0-based) lives in layer `min(t + 1, r)`. The last layer loops onto itself.
#[derive(Debug, Clone)]
pub struct CompositeLattice {
    layers: Vec<LatticeLayer>,
    log_initial: Vec<f64>,
}

impl CompositeLattice {
    pub fn new(model: &HmmModel) -> Self {
        let r = model.order();
        let topo = model.topology();
        let layers = (1..=r)
            .map(|len| {
                let tensor = model.tensor_for_context(len);
                let target_tensor = model.tensor_for_context(len + 1);
                let count = tensor.num_contexts();
                let mut last_state = Vec::with_capacity(count);
                let mut arcs = Vec::with_capacity(count);
                for idx in 0..count {
                    let ctx = tensor.context_states(idx);
                    let last = *ctx.last().unwrap();
                    last_state.push(last);
                    let row = tensor.row(idx);
                    let out = (0..topo.branching())
                        .map(|mv| {
                            let next = topo.successor(last, mv);
                            let mut target_ctx = ctx.clone();
                            target_ctx.push(next);
                            if target_ctx.len() > r {
                                target_ctx.remove(0);
                            }
                            LatticeArc {
                                target: target_tensor
                                    .context_index(&target_ctx)
                                    .expect("legal extension of a legal context"),
                                next_state: next,
                                mv,
                                log_prob: safe_ln(row[mv]),
                            }
                        })
                        .collect();
                    arcs.push(out);
                }
                LatticeLayer {
                    context_len: len,
                    last_state,
                    arcs,
                }
            })
            .collect();
        Self {
            layers,
            log_initial: model.initial().iter().map(|&p| safe_ln(p)).collect(),
        }
    }

    pub fn order(&self) -> usize {
        self.layers.len()
    }

    pub fn layer(&self, t: usize) -> &LatticeLayer {
        &self.layers[t.min(self.layers.len() - 1)]
    }

    pub fn layers(&self) -> &[LatticeLayer] {
        &self.layers
    }

    /// Composite states in the steady-state layer.
    pub fn num_composite_states(&self) -> usize {
        self.layers.last().map(LatticeLayer::len).unwrap_or(0)
    }

    pub fn log_initial(&self) -> &[f64] {
        &self.log_initial
    }

    /// Composite-state index path → conventional state path.
    pub fn to_states(&self, composite_path: &[usize]) -> Vec<usize> {
        composite_path
            .iter()
            .enumerate()
            .map(|(t, &c)| self.layer(t).last_state[c])
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hmm::GaussianMixtureEmission;

    #[test]
    fn composite_rows_sum_to_one() {
        let means: Vec<Vec<f64>> = (0..6).map(|s| vec![s as f64]).collect();
        let e = GaussianMixtureEmission::from_state_means(&means, &[1.0]).unwrap();
        let m = HmmModel::uniform(3, e).unwrap();
        let lat = CompositeLattice::new(&m);
        assert_eq!(lat.num_composite_states(), 24);
        assert!(lat.num_composite_states() <= 6 * 4);
        for layer in lat.layers() {
            for arcs in &layer.arcs {
                let s: f64 = arcs.iter().map(|a| a.log_prob.exp()).sum();
                assert!((s - 1.0).abs() < 1e-12);
            }
        }
    }
}
