use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster::{lbg, nearest};
use crate::error::{Error, Result};
use crate::hmm::MIN_VARIANCE;
use crate::numeric::{column_moments, diag_gaussian_log_pdf, log_sum_exp, safe_ln};

/// Frames per parallel E-step chunk; fixed so merging order never changes.
const CHUNK: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GmmOptions {
    pub num_mixtures: usize,
    pub max_iters: usize,
    pub tol: f64,
    pub variance_floor_ratio: f64,
}

impl Default for GmmOptions {
    fn default() -> Self {
        Self {
            num_mixtures: 32,
            max_iters: 20,
            tol: 1e-5,
            variance_floor_ratio: 1e-4,
        }
    }
}

/// Diagonal Gaussian mixture over pooled frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmBaselineModel {
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub variances: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct GmmOutcome {
    pub model: GmmBaselineModel,
    /// Mean per-frame log-likelihood of the training frames, initial model first.
    pub log_likelihoods: Vec<f64>,
}

impl GmmBaselineModel {
    pub fn dim(&self) -> usize {
        self.means[0].len()
    }

    pub fn num_mixtures(&self) -> usize {
        self.weights.len()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.weights.len();
        if m == 0 || self.means.len() != m || self.variances.len() != m {
            return Err(Error::config("GMM shape is inconsistent"));
        }
        let d = self.means[0].len();
        for (mu, var) in self.means.iter().zip(&self.variances) {
            if mu.len() != d || var.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    actual: mu.len().min(var.len()),
                });
            }
            if mu.iter().any(|v| !v.is_finite()) || var.iter().any(|v| !(v.is_finite() && *v > 0.0))
            {
                return Err(Error::Numeric("invalid GMM component".into()));
            }
        }
        let total: f64 = self.weights.iter().sum();
        if self.weights.iter().any(|w| !(*w >= 0.0)) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::Numeric(format!("GMM weights sum to {total}")));
        }
        Ok(())
    }

    fn component_log_densities(&self, x: &[f64], out: &mut [f64]) {
        for (k, o) in out.iter_mut().enumerate() {
            *o = safe_ln(self.weights[k])
                + diag_gaussian_log_pdf(x, &self.means[k], &self.variances[k]);
        }
    }

    pub fn frame_log_likelihood(&self, x: &[f64]) -> f64 {
        let mut buf = vec![0.0; self.num_mixtures()];
        self.component_log_densities(x, &mut buf);
        log_sum_exp(&buf)
    }

    /// Mean per-frame log-likelihood.
    pub fn score<'a>(&self, frames: impl IntoIterator<Item = &'a [f64]>) -> f64 {
        let mut total = 0.0;
        let mut n = 0;
        for x in frames {
            total += self.frame_log_likelihood(x);
            n += 1;
        }
        total / n as f64
    }
}

struct GmmStats {
    log_likelihood: f64,
    occupancy: Vec<f64>,
    shifted_sum: Vec<Vec<f64>>,
    shifted_sq: Vec<Vec<f64>>,
}

impl GmmStats {
    fn zeros(m: usize, d: usize) -> Self {
        Self {
            log_likelihood: 0.0,
            occupancy: vec![0.0; m],
            shifted_sum: vec![vec![0.0; d]; m],
            shifted_sq: vec![vec![0.0; d]; m],
        }
    }

    fn merge(mut self, other: &GmmStats) -> Self {
        self.log_likelihood += other.log_likelihood;
        for k in 0..self.occupancy.len() {
            self.occupancy[k] += other.occupancy[k];
            for d in 0..self.shifted_sum[k].len() {
                self.shifted_sum[k][d] += other.shifted_sum[k][d];
                self.shifted_sq[k][d] += other.shifted_sq[k][d];
            }
        }
        self
    }
}

fn gmm_e_step(model: &GmmBaselineModel, frames: &[&[f64]]) -> GmmStats {
    let m = model.num_mixtures();
    let parts: Vec<GmmStats> = frames
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut st = GmmStats::zeros(m, model.dim());
            let mut buf = vec![0.0; m];
            for x in chunk {
                model.component_log_densities(x, &mut buf);
                let ll = log_sum_exp(&buf);
                st.log_likelihood += ll;
                for (k, &lk) in buf.iter().enumerate() {
                    let g = (lk - ll).exp();
                    if g == 0.0 {
                        continue;
                    }
                    st.occupancy[k] += g;
                    for (d, &xi) in x.iter().enumerate() {
                        let dev = xi - model.means[k][d];
                        st.shifted_sum[k][d] += g * dev;
                        st.shifted_sq[k][d] += g * dev * dev;
                    }
                }
            }
            st
        })
        .collect();
    parts
        .iter()
        .fold(GmmStats::zeros(m, model.dim()), |acc, s| acc.merge(s))
}

fn gmm_m_step(model: &GmmBaselineModel, st: &GmmStats, n: f64, floor: &[f64]) -> GmmBaselineModel {
    let mut next = model.clone();
    for k in 0..model.num_mixtures() {
        let occ = st.occupancy[k];
        next.weights[k] = occ / n;
        // A component that lost all its frames keeps its shape at weight 0.
        if occ <= 0.0 {
            continue;
        }
        for (d, &f) in floor.iter().enumerate() {
            let shift = st.shifted_sum[k][d] / occ;
            next.means[k][d] = model.means[k][d] + shift;
            next.variances[k][d] = (st.shifted_sq[k][d] / occ - shift * shift).max(f);
        }
    }
    let total: f64 = next.weights.iter().sum();
    for w in &mut next.weights {
        *w /= total;
    }
    next
}

/// LBG initialisation followed by EM on pooled frames.
pub fn train_gmm(frames: &[&[f64]], opts: &GmmOptions, seed: u64) -> Result<GmmOutcome> {
    if frames.is_empty() {
        return Err(Error::EmptyInput("GMM training frames"));
    }
    let dim = frames[0].len();
    if let Some(bad) = frames.iter().find(|f| f.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: bad.len(),
        });
    }
    let (_, global_var, _) = column_moments(frames.iter().copied(), dim);
    let floor: Vec<f64> = global_var
        .iter()
        .map(|v| (v * opts.variance_floor_ratio).max(MIN_VARIANCE))
        .collect();
    let m = opts.num_mixtures;
    let book = lbg(frames, m, seed)?;
    let mut counts = vec![0usize; m];
    for &a in &book.assignments {
        counts[a] += 1;
    }
    let n = frames.len() as f64;
    let mut model = GmmBaselineModel {
        weights: counts
            .iter()
            .map(|&c| (c as f64 + 1.0) / (n + m as f64))
            .collect(),
        means: book.centroids,
        variances: vec![
            global_var
                .iter()
                .zip(&floor)
                .map(|(v, f)| v.max(*f))
                .collect();
            m
        ],
    };
    let mut stats = gmm_e_step(&model, frames);
    let mut history = vec![stats.log_likelihood / n];
    for _ in 0..opts.max_iters {
        let next = gmm_m_step(&model, &stats, n, &floor);
        let next_stats = gmm_e_step(&next, frames);
        let prev = stats.log_likelihood;
        model = next;
        stats = next_stats;
        history.push(stats.log_likelihood / n);
        if (stats.log_likelihood - prev) <= opts.tol * prev.abs() {
            break;
        }
    }
    model.validate()?;
    Ok(GmmOutcome {
        model,
        log_likelihoods: history,
    })
}

/// Codebook of `K` centroids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VqBaselineModel {
    pub centroids: Vec<Vec<f64>>,
}

impl VqBaselineModel {
    pub fn dim(&self) -> usize {
        self.centroids[0].len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.centroids.is_empty() {
            return Err(Error::config("empty codebook"));
        }
        let d = self.dim();
        if self
            .centroids
            .iter()
            .any(|c| c.len() != d || c.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::Numeric("invalid codebook centroid".into()));
        }
        Ok(())
    }

    /// Negative mean squared quantisation distortion.
    pub fn score<'a>(&self, frames: impl IntoIterator<Item = &'a [f64]>) -> f64 {
        let mut total = 0.0;
        let mut n = 0;
        for x in frames {
            total += nearest(x, &self.centroids).1;
            n += 1;
        }
        -total / n as f64
    }
}

/// LBG binary splitting to `k` centroids.
pub fn lbg_codebook(frames: &[&[f64]], k: usize, seed: u64) -> Result<VqBaselineModel> {
    Ok(VqBaselineModel {
        centroids: lbg(frames, k, seed)?.centroids,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn two_clusters(n: usize) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        (0..n)
            .map(|i| {
                let c = if i % 2 == 0 { [-5.0, 2.0] } else { [4.0, -3.0] };
                c.iter()
                    .map(|m| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        m + 0.2 * z
                    })
                    .collect()
            })
            .collect()
    }

    fn refs(rows: &[Vec<f64>]) -> Vec<&[f64]> {
        rows.iter().map(|r| r.as_slice()).collect()
    }

    #[test]
    fn single_centroid_is_mean() {
        let rows = two_clusters(100);
        let vq = lbg_codebook(&refs(&rows), 1, 3).unwrap();
        let (mean, _, _) = column_moments(refs(&rows), 2);
        for (a, b) in vq.centroids[0].iter().zip(&mean) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn two_clusters_recovered() {
        let rows = two_clusters(400);
        let mut c = lbg_codebook(&refs(&rows), 2, 3).unwrap().centroids;
        c.sort_by(|a, b| a[0].partial_cmp(&b[0]).unwrap());
        for (got, want) in c.iter().zip([[-5.0, 2.0], [4.0, -3.0]]) {
            for (g, w) in got.iter().zip(want) {
                assert!((g - w).abs() <= 0.05 * f64::abs(w), "{g} vs {w}");
            }
        }
        assert_eq!(c, {
            let mut again = lbg_codebook(&refs(&rows), 2, 3).unwrap().centroids;
            again.sort_by(|a, b| a[0].partial_cmp(&b[0]).unwrap());
            again
        });
        assert!(lbg_codebook(&refs(&rows[..3]), 4, 3).is_err());
    }

    #[test]
    fn gmm_em_is_monotone() {
        let rows = two_clusters(600);
        let out = train_gmm(
            &refs(&rows),
            &GmmOptions {
                num_mixtures: 4,
                max_iters: 15,
                tol: 0.0,
                ..Default::default()
            },
            5,
        )
        .unwrap();
        for w in out.log_likelihoods.windows(2) {
            assert!(w[1] >= w[0] - 1e-10 * w[0].abs(), "{w:?}");
        }
        out.model.validate().unwrap();
        let own = out.model.score(refs(&rows));
        assert!((own - out.log_likelihoods.last().unwrap()).abs() < 1e-9);
    }

    #[test]
    fn gmm_constant_frames_hit_floor() {
        let rows = vec![vec![1.0, 2.0]; 40];
        let out = train_gmm(
            &refs(&rows),
            &GmmOptions {
                num_mixtures: 2,
                ..Default::default()
            },
            1,
        )
        .unwrap();
        assert!(out.log_likelihoods.iter().all(|l| l.is_finite()));
        assert!(out.model.variances[0].iter().all(|&v| v == MIN_VARIANCE));
    }
}
