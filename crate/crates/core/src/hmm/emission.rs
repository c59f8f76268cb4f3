use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::numeric::{diag_gaussian_log_pdf, log_sum_exp};

/// Per-state diagonal Gaussian mixtures, `M` components of dimension `D`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixtureEmission {
    num_states: usize,
    num_mixtures: usize,
    dim: usize,
    /// `N × M`
    weights: Vec<f64>,
    /// `N × M × D`
    means: Vec<f64>,
    /// `N × M × D`
    variances: Vec<f64>,
}

impl GaussianMixtureEmission {
    pub fn new(
        num_states: usize,
        num_mixtures: usize,
        dim: usize,
        weights: Vec<f64>,
        means: Vec<f64>,
        variances: Vec<f64>,
    ) -> Result<Self> {
        if num_states == 0 || num_mixtures == 0 || dim == 0 {
            return Err(Error::arg("emission sizes must be positive"));
        }
        let nm = num_states * num_mixtures;
        if weights.len() != nm {
            return Err(Error::DimensionMismatch {
                expected: nm,
                actual: weights.len(),
            });
        }
        for v in [&means, &variances] {
            if v.len() != nm * dim {
                return Err(Error::DimensionMismatch {
                    expected: nm * dim,
                    actual: v.len(),
                });
            }
        }
        let e = Self {
            num_states,
            num_mixtures,
            dim,
            weights,
            means,
            variances,
        };
        e.validate(1e-9)?;
        Ok(e)
    }

    /// Single-component emissions with the given per-state means and a
    /// shared diagonal variance.
    pub fn from_state_means(state_means: &[Vec<f64>], variance: &[f64]) -> Result<Self> {
        let n = state_means.len();
        let dim = variance.len();
        if state_means.iter().any(|m| m.len() != dim) {
            return Err(Error::arg("state means differ from variance dimension"));
        }
        Self::new(
            n,
            1,
            dim,
            vec![1.0; n],
            state_means.concat(),
            variance.repeat(n),
        )
    }

    pub fn validate(&self, tol: f64) -> Result<()> {
        if self.variances.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Numeric(
                "variance must be finite and positive".into(),
            ));
        }
        if self.means.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite mixture mean".into()));
        }
        if self.weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::Numeric("invalid mixture weight".into()));
        }
        let dev = self.max_weight_deviation();
        if dev > tol {
            return Err(Error::Numeric(format!(
                "mixture weights deviate from 1 by {dev:e}"
            )));
        }
        Ok(())
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_mixtures(&self) -> usize {
        self.num_mixtures
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weights(&self, state: usize) -> &[f64] {
        let m = self.num_mixtures;
        &self.weights[state * m..(state + 1) * m]
    }

    pub fn mean(&self, state: usize, mix: usize) -> &[f64] {
        let off = (state * self.num_mixtures + mix) * self.dim;
        &self.means[off..off + self.dim]
    }

    pub fn variance(&self, state: usize, mix: usize) -> &[f64] {
        let off = (state * self.num_mixtures + mix) * self.dim;
        &self.variances[off..off + self.dim]
    }

    pub(crate) fn set_component(
        &mut self,
        state: usize,
        mix: usize,
        weight: f64,
        mean: &[f64],
        variance: &[f64],
    ) {
        let m = self.num_mixtures;
        self.weights[state * m + mix] = weight;
        let off = (state * m + mix) * self.dim;
        self.means[off..off + self.dim].copy_from_slice(mean);
        self.variances[off..off + self.dim].copy_from_slice(variance);
    }

    pub(crate) fn set_weight(&mut self, state: usize, mix: usize, weight: f64) {
        self.weights[state * self.num_mixtures + mix] = weight;
    }

    pub fn max_weight_deviation(&self) -> f64 {
        self.weights
            .chunks_exact(self.num_mixtures)
            .map(|w| (w.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Writes `log w_m + log N_m(x)` for each component into `out`.
    pub fn component_log_densities(&self, state: usize, x: &[f64], out: &mut [f64]) {
        for (m, slot) in out.iter_mut().enumerate().take(self.num_mixtures) {
            let w = self.weights[state * self.num_mixtures + m];
            *slot = if w > 0.0 {
                w.ln() + diag_gaussian_log_pdf(x, self.mean(state, m), self.variance(state, m))
            } else {
                f64::NEG_INFINITY
            };
        }
    }

    pub fn log_density(&self, state: usize, x: &[f64]) -> f64 {
        let mut buf = vec![0.0; self.num_mixtures];
        self.component_log_densities(state, x, &mut buf);
        log_sum_exp(&buf)
    }

    pub fn sample<R: Rng + ?Sized>(&self, state: usize, rng: &mut R) -> Vec<f64> {
        let weights = self.weights(state);
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut mix = weights.len() - 1;
        for (m, w) in weights.iter().enumerate() {
            acc += w;
            if u < acc {
                mix = m;
                break;
            }
        }
        self.mean(state, mix)
            .iter()
            .zip(self.variance(state, mix))
            .map(|(mu, var)| {
                let z: f64 = StandardNormal.sample(rng);
                mu + var.sqrt() * z
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn single_gaussian_density() {
        let e = GaussianMixtureEmission::from_state_means(&[vec![1.0, -1.0]], &[2.0, 0.5]).unwrap();
        let x = [0.0, 0.0];
        let expected = -0.5 * ((2.0 * PI * 2.0).ln() + 0.5 + (2.0 * PI * 0.5).ln() + 2.0);
        assert!((e.log_density(0, &x) - expected).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(
            GaussianMixtureEmission::new(1, 2, 1, vec![0.5, 0.6], vec![0.0; 2], vec![1.0; 2])
                .is_err()
        );
        assert!(GaussianMixtureEmission::new(1, 1, 1, vec![1.0], vec![0.0], vec![0.0]).is_err());
        assert!(GaussianMixtureEmission::new(1, 1, 2, vec![1.0], vec![0.0], vec![1.0]).is_err());
    }

    #[test]
    fn mixture_is_log_sum_of_components() {
        let e =
            GaussianMixtureEmission::new(1, 2, 1, vec![0.3, 0.7], vec![-1.0, 2.0], vec![1.0, 0.25])
                .unwrap();
        let x = [0.4];
        let direct = 0.3 * (-(x[0] + 1.0f64).powi(2) / 2.0).exp() / (2.0 * PI).sqrt()
            + 0.7 * (-(x[0] - 2.0f64).powi(2) / 0.5).exp() / (2.0 * PI * 0.25).sqrt();
        assert!((e.log_density(0, &x) - direct.ln()).abs() < 1e-13);
    }
}
