//! Small numeric helpers shared across modules.

use std::f64::consts::PI;

/// `log(sum(exp(xs)))`, returning `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Log-add of two values.
#[inline]
pub fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Natural log that maps 0 to `-inf` instead of producing a NaN path.
#[inline]
pub fn safe_ln(p: f64) -> f64 {
    if p > 0.0 {
        p.ln()
    } else {
        f64::NEG_INFINITY
    }
}

/// Log density of a diagonal Gaussian.
pub fn diag_gaussian_log_pdf(x: &[f64], mean: &[f64], var: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), mean.len());
    debug_assert_eq!(x.len(), var.len());
    let mut acc = 0.0;
    for ((&xi, &mi), &vi) in x.iter().zip(mean).zip(var) {
        let d = xi - mi;
        acc += (2.0 * PI * vi).ln() + d * d / vi;
    }
    -0.5 * acc
}

/// Per-dimension mean and population variance of a set of rows.
pub fn column_moments<'a, I>(rows: I, dim: usize) -> (Vec<f64>, Vec<f64>, usize)
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut sum = vec![0.0; dim];
    let mut sq = vec![0.0; dim];
    let mut n = 0usize;
    for row in rows {
        for (d, &x) in row.iter().enumerate() {
            sum[d] += x;
            sq[d] += x * x;
        }
        n += 1;
    }
    if n == 0 {
        return (sum, sq, 0);
    }
    let nf = n as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / nf).collect();
    let var = sq
        .iter()
        .zip(&mean)
        .map(|(s, m)| (s / nf - m * m).max(0.0))
        .collect();
    (mean, var, n)
}

/// Normalises `probs` in place and clamps every entry into `[floor, 1]`,
/// redistributing mass so the row still sums to one.
///
/// For a two-entry row this is the exact maximiser of `Σ c_m log p_m` under
/// the floor constraint, so EM stays monotone with flooring engaged.
pub fn normalize_with_floor(probs: &mut [f64], floor: f64) {
    let n = probs.len();
    if n == 0 {
        return;
    }
    if n == 1 {
        probs[0] = 1.0;
        return;
    }
    let total: f64 = probs.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        probs.iter_mut().for_each(|p| *p = 1.0 / n as f64);
        return;
    }
    probs.iter_mut().for_each(|p| *p /= total);
    // Water-filling: pin entries below the floor, rescale the rest.
    let mut pinned = vec![false; n];
    loop {
        let free_mass: f64 = probs
            .iter()
            .zip(&pinned)
            .filter(|(_, &pin)| !pin)
            .map(|(p, _)| *p)
            .sum();
        let n_pinned = pinned.iter().filter(|&&p| p).count();
        let target = 1.0 - floor * n_pinned as f64;
        let scale = if free_mass > 0.0 {
            target / free_mass
        } else {
            0.0
        };
        let mut changed = false;
        for (p, pin) in probs.iter_mut().zip(pinned.iter_mut()) {
            if *pin {
                *p = floor;
            } else {
                *p *= scale;
                if *p < floor {
                    *pin = true;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    for (p, pin) in probs.iter_mut().zip(&pinned) {
        if *pin {
            *p = floor;
        }
    }
    // Rounding cleanup so the row sums to one within an ulp or two.
    let s: f64 = probs.iter().sum();
    if let Some((idx, _)) = probs
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
    {
        probs[idx] += 1.0 - s;
    }
}

/// Stable 64-bit FNV-1a hash, used to derive per-utterance sub-seeds.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}
