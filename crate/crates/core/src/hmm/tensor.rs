use super::CircularTopology;
use crate::error::{Error, Result};
use crate::numeric::safe_ln;

/// Transition probabilities of order `r`, stored only on legal circular paths.
///
/// A context `(s_1, …, s_r)` is encoded as its first state followed by the
/// moves between consecutive states, giving `N · b^(r-1)` rows of `b`
/// successor probabilities where `b` is the topology's branching factor.
/// Illegal transitions have no storage, so their mass is exactly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionTensor {
    topology: CircularTopology,
    order: usize,
    probs: Vec<f64>,
}

impl TransitionTensor {
    pub fn uniform(topology: CircularTopology, order: usize) -> Result<Self> {
        if !(1..=3).contains(&order) {
            return Err(Error::UnsupportedOrder(order));
        }
        let b = topology.branching();
        let rows = topology.num_states() * b.pow(order as u32 - 1);
        Ok(Self {
            topology,
            order,
            probs: vec![1.0 / b as f64; rows * b],
        })
    }

    /// Builds a tensor from row-major probabilities, validating normalisation.
    pub fn from_rows(topology: CircularTopology, order: usize, probs: Vec<f64>) -> Result<Self> {
        let mut t = Self::uniform(topology, order)?;
        if probs.len() != t.probs.len() {
            return Err(Error::DimensionMismatch {
                expected: t.probs.len(),
                actual: probs.len(),
            });
        }
        t.probs = probs;
        t.validate(1e-9)?;
        Ok(t)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn topology(&self) -> CircularTopology {
        self.topology
    }

    pub fn branching(&self) -> usize {
        self.topology.branching()
    }

    pub fn num_contexts(&self) -> usize {
        self.probs.len() / self.branching()
    }

    /// Index of a legal context, or `None` if the path uses an illegal move.
    pub fn context_index(&self, context: &[usize]) -> Option<usize> {
        if context.len() != self.order {
            return None;
        }
        let b = self.branching();
        let (&first, rest) = context.split_first()?;
        if first >= self.topology.num_states() {
            return None;
        }
        let mut idx = first;
        let mut prev = first;
        for &s in rest {
            idx = idx * b + self.topology.move_between(prev, s)?;
            prev = s;
        }
        Some(idx)
    }

    pub fn context_states(&self, index: usize) -> Vec<usize> {
        let b = self.branching();
        let mut moves = Vec::with_capacity(self.order - 1);
        let mut rem = index;
        for _ in 1..self.order {
            moves.push(rem % b);
            rem /= b;
        }
        let mut states = Vec::with_capacity(self.order);
        states.push(rem);
        for mv in moves.into_iter().rev() {
            let last = *states.last().unwrap();
            states.push(self.topology.successor(last, mv));
        }
        states
    }

    /// Last state of the context at `index`.
    pub fn context_last(&self, index: usize) -> usize {
        *self.context_states(index).last().unwrap()
    }

    pub fn row(&self, index: usize) -> &[f64] {
        let b = self.branching();
        &self.probs[index * b..(index + 1) * b]
    }

    pub(crate) fn row_mut(&mut self, index: usize) -> &mut [f64] {
        let b = self.branching();
        &mut self.probs[index * b..(index + 1) * b]
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.probs
    }

    /// `P(next | context)`; zero for illegal contexts or successors.
    pub fn prob(&self, context: &[usize], next: usize) -> f64 {
        let Some(idx) = self.context_index(context) else {
            return 0.0;
        };
        let last = *context.last().unwrap();
        match self.topology.move_between(last, next) {
            Some(mv) => self.row(idx)[mv],
            None => 0.0,
        }
    }

    pub fn log_prob(&self, context: &[usize], next: usize) -> f64 {
        safe_ln(self.prob(context, next))
    }

    /// Largest `|Σ_row − 1|` over all contexts.
    pub fn max_row_deviation(&self) -> f64 {
        self.probs
            .chunks_exact(self.branching())
            .map(|r| (r.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn validate(&self, tol: f64) -> Result<()> {
        if self.probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::Numeric(format!(
                "order-{} tensor has a negative or non-finite entry",
                self.order
            )));
        }
        let dev = self.max_row_deviation();
        if dev > tol {
            return Err(Error::Numeric(format!(
                "order-{} tensor row deviates from 1 by {dev:e}",
                self.order
            )));
        }
        Ok(())
    }

    /// Order `r + 1` tensor whose row for `(c, s_1..s_r)` copies this tensor's
    /// row for `(s_1..s_r)`, for every legal extra context symbol `c`.
    pub fn extend_context(&self) -> Result<Self> {
        let mut out = Self::uniform(self.topology, self.order + 1)?;
        for idx in 0..out.num_contexts() {
            let states = out.context_states(idx);
            let inner = self
                .context_index(&states[1..])
                .expect("suffix of a legal context is legal");
            out.row_mut(idx).copy_from_slice(self.row(inner));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn context_encoding_round_trips() {
        for n in 1..=6 {
            let topo = CircularTopology::new(n).unwrap();
            for order in 1..=3 {
                let t = TransitionTensor::uniform(topo, order).unwrap();
                assert_eq!(t.num_contexts(), n * topo.branching().pow(order as u32 - 1));
                for idx in 0..t.num_contexts() {
                    let states = t.context_states(idx);
                    assert_eq!(t.context_index(&states), Some(idx));
                }
            }
        }
    }

    #[test]
    fn illegal_mass_is_zero() {
        let topo = CircularTopology::new(6).unwrap();
        let t = TransitionTensor::uniform(topo, 3).unwrap();
        assert_eq!(t.prob(&[0, 1, 2], 4), 0.0);
        assert_eq!(t.prob(&[0, 2, 3], 3), 0.0);
        assert_eq!(t.prob(&[5, 0, 0], 1), 0.5);
        assert_eq!(t.log_prob(&[0, 1, 1], 3), f64::NEG_INFINITY);
        // Composite count is N · 2^(r-1) = 24 for the default ring.
        assert_eq!(t.num_contexts(), 24);
    }

    #[test]
    fn extension_copies_rows() {
        let topo = CircularTopology::new(3).unwrap();
        let probs = vec![0.9, 0.1, 0.3, 0.7, 0.6, 0.4];
        let t1 = TransitionTensor::from_rows(topo, 1, probs).unwrap();
        let t2 = t1.extend_context().unwrap();
        for c in 0..3 {
            for mv in 0..2 {
                let i = topo.successor(c, mv);
                for next_mv in 0..2 {
                    let next = topo.successor(i, next_mv);
                    assert_eq!(t2.prob(&[c, i], next), t1.prob(&[i], next));
                }
            }
        }
        assert!(t2.max_row_deviation() < 1e-15);
        assert!(TransitionTensor::uniform(topo, 4).is_err());
    }
}
