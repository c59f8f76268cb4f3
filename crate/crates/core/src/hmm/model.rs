use super::{CircularTopology, GaussianMixtureEmission, TransitionTensor};
use crate::error::{Error, Result};
use crate::features::FeatureSequence;
use crate::numeric::safe_ln;

/// An order-`r` circular HMM.
///
/// `tensors[k]` has order `k + 1`. The last one is the main transition
/// tensor; the earlier ones are boot tensors used while fewer than `r`
/// previous states exist (order 1 at the second frame, order 2 at the third).
#[derive(Debug, Clone, PartialEq)]
pub struct HmmModel {
    topology: CircularTopology,
    initial: Vec<f64>,
    tensors: Vec<TransitionTensor>,
    emissions: GaussianMixtureEmission,
}

/// Row-sum tolerance accepted when constructing a model from parts.
const CONSTRUCT_TOL: f64 = 1e-9;

impl HmmModel {
    pub fn new(
        initial: Vec<f64>,
        tensors: Vec<TransitionTensor>,
        emissions: GaussianMixtureEmission,
    ) -> Result<Self> {
        let order = tensors.len();
        if !(1..=3).contains(&order) {
            return Err(Error::UnsupportedOrder(order));
        }
        let topology = tensors[0].topology();
        let n = topology.num_states();
        for (k, t) in tensors.iter().enumerate() {
            if t.order() != k + 1 || t.topology() != topology {
                return Err(Error::arg(format!(
                    "tensor {k} must have order {} on the shared topology",
                    k + 1
                )));
            }
            t.validate(CONSTRUCT_TOL)?;
        }
        if initial.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: initial.len(),
            });
        }
        if initial.iter().any(|p| !(p.is_finite() && *p >= 0.0))
            || (initial.iter().sum::<f64>() - 1.0).abs() > CONSTRUCT_TOL
        {
            return Err(Error::Numeric("initial probabilities must sum to 1".into()));
        }
        if emissions.num_states() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: emissions.num_states(),
            });
        }
        emissions.validate(CONSTRUCT_TOL)?;
        Ok(Self {
            topology,
            initial,
            tensors,
            emissions,
        })
    }

    /// Uniform initial and transition probabilities over legal moves.
    pub fn uniform(order: usize, emissions: GaussianMixtureEmission) -> Result<Self> {
        let topology = CircularTopology::new(emissions.num_states())?;
        let n = topology.num_states();
        let tensors = (1..=order)
            .map(|k| TransitionTensor::uniform(topology, k))
            .collect::<Result<Vec<_>>>()?;
        Self::new(vec![1.0 / n as f64; n], tensors, emissions)
    }

    pub fn order(&self) -> usize {
        self.tensors.len()
    }

    pub fn topology(&self) -> CircularTopology {
        self.topology
    }

    pub fn num_states(&self) -> usize {
        self.topology.num_states()
    }

    pub fn dim(&self) -> usize {
        self.emissions.dim()
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn tensors(&self) -> &[TransitionTensor] {
        &self.tensors
    }

    /// Tensor used for a transition whose context holds `len` states.
    pub fn tensor_for_context(&self, len: usize) -> &TransitionTensor {
        &self.tensors[len.min(self.order()) - 1]
    }

    pub fn emissions(&self) -> &GaussianMixtureEmission {
        &self.emissions
    }

    pub(crate) fn parts_mut(
        &mut self,
    ) -> (
        &mut Vec<f64>,
        &mut Vec<TransitionTensor>,
        &mut GaussianMixtureEmission,
    ) {
        (&mut self.initial, &mut self.tensors, &mut self.emissions)
    }

    /// Largest deviation from 1 over every probability row in the model:
    /// initial vector, all transition rows and all mixture weight rows.
    pub fn max_normalization_error(&self) -> f64 {
        let init = (self.initial.iter().sum::<f64>() - 1.0).abs();
        self.tensors
            .iter()
            .map(TransitionTensor::max_row_deviation)
            .chain([init, self.emissions.max_weight_deviation()])
            .fold(0.0, f64::max)
    }

    /// `log P(Q)`: `log Ψ(q1)` plus one transition term per later frame, each
    /// conditioned on up to `r` previous states. `-inf` for illegal paths.
    pub fn sequence_log_prob(&self, states: &[usize]) -> Result<f64> {
        if states.is_empty() {
            return Err(Error::EmptyInput("state sequence"));
        }
        for &s in states {
            self.topology.check(s)?;
        }
        let r = self.order();
        let mut lp = safe_ln(self.initial[states[0]]);
        for t in 1..states.len() {
            let ctx = &states[t.saturating_sub(r)..t];
            lp += self.tensor_for_context(ctx.len()).log_prob(ctx, states[t]);
            if lp == f64::NEG_INFINITY {
                break;
            }
        }
        Ok(lp)
    }

    /// `Σ_t log b_{q_t}(O_t)`.
    pub fn emission_log_likelihood(
        &self,
        states: &[usize],
        observations: &FeatureSequence,
    ) -> Result<f64> {
        self.check_observations(observations)?;
        if states.len() != observations.num_frames() {
            return Err(Error::DimensionMismatch {
                expected: observations.num_frames(),
                actual: states.len(),
            });
        }
        let mut total = 0.0;
        for (t, &s) in states.iter().enumerate() {
            self.topology.check(s)?;
            total += self.emissions.log_density(s, observations.frame(t));
        }
        Ok(total)
    }

    /// `log P(Q, O | λ)`.
    pub fn joint_log_prob(&self, states: &[usize], observations: &FeatureSequence) -> Result<f64> {
        let emit = self.emission_log_likelihood(states, observations)?;
        let seq = self.sequence_log_prob(states)?;
        Ok(seq + emit)
    }

    pub(crate) fn check_observations(&self, observations: &FeatureSequence) -> Result<()> {
        if observations.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: observations.dim(),
            });
        }
        Ok(())
    }

    /// Lifts an order-`r` model to order `r + 1` without changing the
    /// distribution it defines: the new main tensor ignores the extra oldest
    /// context state, and the old main tensor becomes the newest boot tensor.
    pub fn promote_order(&self) -> Result<Self> {
        let r = self.order();
        if r >= 3 {
            return Err(Error::UnsupportedOrder(r + 1));
        }
        let mut tensors = self.tensors.clone();
        tensors.push(self.tensors[r - 1].extend_context()?);
        Ok(Self {
            topology: self.topology,
            initial: self.initial.clone(),
            tensors,
            emissions: self.emissions.clone(),
        })
    }
}
