//! Lloyd k-means and LBG binary-splitting codebook training.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numeric::column_moments;

const SPLIT_EPSILON: f64 = 0.01;
const LLOYD_MAX_ITERS: usize = 25;
const LLOYD_REL_TOL: f64 = 1e-5;

#[inline]
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index and squared distance of the nearest centroid; ties go to the lower index.
pub fn nearest(x: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centroids.iter().enumerate() {
        let d = squared_distance(x, c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

#[derive(Debug, Clone)]
pub struct LloydResult {
    pub centroids: Vec<Vec<f64>>,
    pub assignments: Vec<usize>,
    /// Mean squared distortion after each assignment step.
    pub distortion: Vec<f64>,
}

/// Lloyd iterations from the given starting centroids. Empty cells are moved
/// onto the frame currently worst served, which never raises distortion.
pub fn lloyd(frames: &[&[f64]], mut centroids: Vec<Vec<f64>>, max_iters: usize) -> LloydResult {
    let dim = centroids[0].len();
    let k = centroids.len();
    let mut distortion = Vec::new();
    let mut assignments = vec![0; frames.len()];
    for _ in 0..max_iters.max(1) {
        let nearest_all: Vec<(usize, f64)> =
            frames.par_iter().map(|x| nearest(x, &centroids)).collect();
        let total: f64 = nearest_all.iter().map(|(_, d)| d).sum();
        let mean = total / frames.len() as f64;
        for (a, (i, _)) in assignments.iter_mut().zip(&nearest_all) {
            *a = *i;
        }
        let converged = distortion
            .last()
            .map(|&prev: &f64| prev - mean <= LLOYD_REL_TOL * prev.abs().max(f64::MIN_POSITIVE))
            .unwrap_or(false);
        distortion.push(mean);
        if converged {
            break;
        }

        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (x, &a) in frames.iter().zip(&assignments) {
            counts[a] += 1;
            for (s, v) in sums[a].iter_mut().zip(x.iter()) {
                *s += v;
            }
        }
        let mut taken = vec![false; frames.len()];
        for c in 0..k {
            if counts[c] > 0 {
                centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            } else {
                // Worst-served frame not already used to re-seed another cell.
                let far = nearest_all
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| !taken[*i])
                    .max_by(|a, b| a.1 .1.partial_cmp(&b.1 .1).unwrap().then(b.0.cmp(&a.0)))
                    .map(|(i, _)| i);
                if let Some(i) = far {
                    taken[i] = true;
                    centroids[c] = frames[i].to_vec();
                }
            }
        }
    }
    LloydResult {
        centroids,
        assignments,
        distortion,
    }
}

#[derive(Debug, Clone)]
pub struct Codebook {
    pub centroids: Vec<Vec<f64>>,
    pub assignments: Vec<usize>,
    /// Distortion trace of the Lloyd run at each codebook size.
    pub distortion_by_level: Vec<Vec<f64>>,
}

/// LBG: start from the global mean, split cells (highest-distortion first)
/// with a seeded perturbation, refine with Lloyd after every split, until
/// `k` centroids exist.
pub fn lbg(frames: &[&[f64]], k: usize, seed: u64) -> Result<Codebook> {
    if k == 0 {
        return Err(Error::arg("codebook size must be at least 1"));
    }
    if frames.len() < k {
        return Err(Error::arg(format!(
            "{} frames cannot fill a codebook of {k}",
            frames.len()
        )));
    }
    let dim = frames[0].len();
    if frames.iter().any(|f| f.len() != dim) {
        return Err(Error::arg("frames differ in dimension"));
    }
    let (mean, var, _) = column_moments(frames.iter().copied(), dim);
    let scale: Vec<f64> = var.iter().map(|v| v.sqrt().max(1e-6)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut run = lloyd(frames, vec![mean], 1);
    let mut levels = vec![run.distortion.clone()];
    while run.centroids.len() < k {
        let current = run.centroids.len();
        let n_split = current.min(k - current);
        let mut cell_distortion = vec![0.0; current];
        for (x, &a) in frames.iter().zip(&run.assignments) {
            cell_distortion[a] += squared_distance(x, &run.centroids[a]);
        }
        let mut order: Vec<usize> = (0..current).collect();
        order.sort_by(|&a, &b| {
            cell_distortion[b]
                .partial_cmp(&cell_distortion[a])
                .unwrap()
                .then(a.cmp(&b))
        });
        let mut centroids = run.centroids.clone();
        for &c in order.iter().take(n_split) {
            let delta: Vec<f64> = scale
                .iter()
                .map(|s| {
                    let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                    sign * SPLIT_EPSILON * s
                })
                .collect();
            let base = centroids[c].clone();
            centroids[c] = base.iter().zip(&delta).map(|(b, d)| b + d).collect();
            centroids.push(base.iter().zip(&delta).map(|(b, d)| b - d).collect());
        }
        run = lloyd(frames, centroids, LLOYD_MAX_ITERS);
        levels.push(run.distortion.clone());
    }
    Ok(Codebook {
        centroids: run.centroids,
        assignments: run.assignments,
        distortion_by_level: levels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    fn two_clusters(n: usize) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let noise = Normal::new(0.0, 0.1).unwrap();
        (0..n)
            .map(|i| {
                let c = if i % 2 == 0 {
                    [10.0, 5.0]
                } else {
                    [-4.0, 20.0]
                };
                vec![c[0] + noise.sample(&mut rng), c[1] + noise.sample(&mut rng)]
            })
            .collect()
    }

    #[test]
    fn distortion_never_increases() {
        let data = two_clusters(200);
        let frames: Vec<&[f64]> = data.iter().map(Vec::as_slice).collect();
        let book = lbg(&frames, 7, 11).unwrap();
        assert_eq!(book.centroids.len(), 7);
        for level in &book.distortion_by_level {
            for w in level.windows(2) {
                assert!(w[1] <= w[0] + 1e-12 * w[0].abs());
            }
        }
    }

    #[test]
    fn empty_cells_are_reseeded() {
        let data = [vec![0.0], vec![0.1], vec![10.0]];
        let frames: Vec<&[f64]> = data.iter().map(Vec::as_slice).collect();
        let run = lloyd(&frames, vec![vec![0.05], vec![100.0], vec![200.0]], 5);
        let mut used: Vec<usize> = run.assignments.clone();
        used.sort();
        used.dedup();
        assert_eq!(used.len(), 3);
        assert!(*run.distortion.last().unwrap() < 1e-12);
    }
}
