use std::f64::consts::PI;

use rustfft::{num_complex::Complex, FftPlanner};

use super::{AudioClip, FeatureSequence, MfccConfig};
use crate::error::{Error, Result};

/// Floor applied to filterbank energies before the log so silence stays finite.
pub const LOG_FLOOR: f64 = 1e-10;

pub fn preemphasize(clip: &AudioClip, coeff: f64) -> Result<AudioClip> {
    if !(0.0..1.0).contains(&coeff) {
        return Err(Error::arg("preemphasis coefficient must lie in [0, 1)"));
    }
    Ok(AudioClip {
        samples: preemphasize_samples(clip.samples(), coeff),
        sample_rate_hz: clip.sample_rate_hz(),
    })
}

// No range check: the difference equation itself is well defined for any coeff.
pub(crate) fn preemphasize_samples(x: &[f64], coeff: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len());
    if let Some(&first) = x.first() {
        out.push(first);
    }
    out.extend(x.windows(2).map(|w| w[1] - coeff * w[0]));
    out
}

pub fn hamming_window(len: usize) -> Vec<f64> {
    if len == 1 {
        return vec![1.0];
    }
    let denom = (len - 1) as f64;
    (0..len)
        .map(|n| 0.54 - 0.46 * (2.0 * PI * n as f64 / denom).cos())
        .collect()
}

/// Cuts the clip into Hamming-windowed frames; a trailing partial frame is
/// dropped.
pub fn frame_and_window(clip: &AudioClip, cfg: &MfccConfig) -> Result<Vec<Vec<f64>>> {
    frame_samples(clip.samples(), clip.sample_rate_hz(), cfg)
}

fn frame_samples(x: &[f64], rate: u32, cfg: &MfccConfig) -> Result<Vec<Vec<f64>>> {
    let len = cfg.frame_samples(rate);
    let shift = cfg.shift_samples(rate);
    if len == 0 {
        return Err(Error::config("frame length rounds to zero samples"));
    }
    if x.len() < len {
        return Err(Error::TooShort {
            samples: x.len(),
            needed: len,
        });
    }
    let window = hamming_window(len);
    let count = cfg.num_frames(x.len(), rate);
    Ok((0..count)
        .map(|t| {
            x[t * shift..t * shift + len]
                .iter()
                .zip(&window)
                .map(|(s, w)| s * w)
                .collect()
        })
        .collect())
}

fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filters evenly spaced on the mel scale between 0 Hz and Nyquist.
#[derive(Debug, Clone)]
pub struct MelFilterbank {
    centers_hz: Vec<f64>,
    /// `num_filters × (fft_size/2 + 1)` weights.
    weights: Vec<Vec<f64>>,
}

impl MelFilterbank {
    pub fn new(num_filters: usize, fft_size: usize, sample_rate_hz: u32) -> Self {
        let nyquist = sample_rate_hz as f64 / 2.0;
        let mel_max = hz_to_mel(nyquist);
        let edges: Vec<f64> = (0..num_filters + 2)
            .map(|i| mel_to_hz(mel_max * i as f64 / (num_filters + 1) as f64))
            .collect();
        let num_bins = fft_size / 2 + 1;
        let bin_hz = sample_rate_hz as f64 / fft_size as f64;
        let weights = (0..num_filters)
            .map(|m| {
                let (lo, mid, hi) = (edges[m], edges[m + 1], edges[m + 2]);
                (0..num_bins)
                    .map(|k| {
                        let f = k as f64 * bin_hz;
                        let rising = (f - lo) / (mid - lo);
                        let falling = (hi - f) / (hi - mid);
                        rising.min(falling).max(0.0)
                    })
                    .collect()
            })
            .collect();
        Self {
            centers_hz: edges[1..=num_filters].to_vec(),
            weights,
        }
    }

    pub fn centers_hz(&self) -> &[f64] {
        &self.centers_hz
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn apply(&self, power: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .map(|w| w.iter().zip(power).map(|(a, b)| a * b).sum())
            .collect()
    }
}

struct PowerSpectrum {
    fft: std::sync::Arc<dyn rustfft::Fft<f64>>,
    size: usize,
}

impl PowerSpectrum {
    fn new(size: usize) -> Self {
        let fft = FftPlanner::new().plan_fft_forward(size);
        Self { fft, size }
    }

    fn compute(&self, frame: &[f64]) -> Vec<f64> {
        let mut buf: Vec<Complex<f64>> = frame
            .iter()
            .map(|&s| Complex::new(s, 0.0))
            .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
            .take(self.size)
            .collect();
        self.fft.process(&mut buf);
        buf[..self.size / 2 + 1]
            .iter()
            .map(|c| c.norm_sqr())
            .collect()
    }
}

/// Mel filterbank energies per frame, before the log stage.
pub fn filterbank_energies(clip: &AudioClip, cfg: &MfccConfig) -> Result<Vec<Vec<f64>>> {
    cfg.validate()?;
    let emphasized = preemphasize_samples(clip.samples(), cfg.preemphasis_coeff);
    let frames = frame_samples(&emphasized, clip.sample_rate_hz(), cfg)?;
    if cfg.fft_size < cfg.frame_samples(clip.sample_rate_hz()) {
        return Err(Error::config(
            "fft_size is smaller than a frame at this sample rate",
        ));
    }
    let spectrum = PowerSpectrum::new(cfg.fft_size);
    let bank = MelFilterbank::new(cfg.num_mel_filters, cfg.fft_size, clip.sample_rate_hz());
    frames
        .iter()
        .map(|frame| {
            let power = spectrum.compute(frame);
            if power.iter().any(|p| !p.is_finite()) {
                return Err(Error::Numeric("non-finite value in power spectrum".into()));
            }
            Ok(bank.apply(&power))
        })
        .collect()
}

/// Unnormalised DCT-II of `x`, first `n_out` coefficients.
fn dct2(x: &[f64], n_out: usize) -> Vec<f64> {
    let k = x.len() as f64;
    (0..n_out)
        .map(|n| {
            x.iter()
                .enumerate()
                .map(|(i, v)| v * (PI * n as f64 * (i as f64 + 0.5) / k).cos())
                .sum()
        })
        .collect()
}

/// Static cepstra only: `T × num_cepstra`, c0 first.
pub fn mfcc(clip: &AudioClip, cfg: &MfccConfig) -> Result<FeatureSequence> {
    let energies = filterbank_energies(clip, cfg)?;
    let rows: Vec<Vec<f64>> = energies
        .iter()
        .map(|e| {
            let logs: Vec<f64> = e.iter().map(|v| v.max(LOG_FLOOR).ln()).collect();
            dct2(&logs, cfg.num_cepstra)
        })
        .collect();
    FeatureSequence::from_rows(&rows, cfg.frame_shift_ms)
}

/// Appends regression deltas over `±delta_window` frames, replicating edge
/// frames. Output dimension is twice the input dimension.
pub fn append_deltas(seq: &FeatureSequence, delta_window: usize) -> Result<FeatureSequence> {
    if delta_window == 0 {
        return Err(Error::arg("delta window must be at least 1"));
    }
    let t_len = seq.num_frames() as isize;
    let dim = seq.dim();
    let norm: f64 = 2.0 * (1..=delta_window).map(|k| (k * k) as f64).sum::<f64>();
    let at = |t: isize| seq.frame(t.clamp(0, t_len - 1) as usize);
    let mut data = Vec::with_capacity(seq.as_flat().len() * 2);
    for t in 0..t_len {
        data.extend_from_slice(at(t));
        for d in 0..dim {
            let num: f64 = (1..=delta_window as isize)
                .map(|k| k as f64 * (at(t + k)[d] - at(t - k)[d]))
                .sum();
            data.push(num / norm);
        }
    }
    FeatureSequence::from_flat(data, dim * 2, seq.frame_shift_ms())
}

/// Full front-end: MFCC followed by deltas.
pub fn extract_features(clip: &AudioClip, cfg: &MfccConfig) -> Result<FeatureSequence> {
    if clip.sample_rate_hz() != cfg.sample_rate_hz {
        return Err(Error::UnsupportedAudio(format!(
            "sample rate {} Hz does not match configured {} Hz",
            clip.sample_rate_hz(),
            cfg.sample_rate_hz
        )));
    }
    append_deltas(&mfcc(clip, cfg)?, cfg.delta_window)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn clip(samples: Vec<f64>) -> AudioClip {
        AudioClip::new(samples, 16_000).unwrap()
    }

    fn tone(freq: f64, n: usize, amp: f64) -> AudioClip {
        clip(
            (0..n)
                .map(|i| amp * (2.0 * PI * freq * i as f64 / 16_000.0).sin())
                .collect(),
        )
    }

    #[test]
    fn preemphasis_cases() {
        let c = clip(vec![0.3, -0.2, 0.9]);
        assert_eq!(preemphasize(&c, 0.0).unwrap(), c);

        // coeff = 1 is outside the accepted range, so check the equation directly.
        assert_eq!(
            preemphasize_samples(&[0.5, 0.5, 0.5], 1.0),
            vec![0.5, 0.0, 0.0]
        );

        let out = preemphasize(&clip(vec![1.0, 1.0]), 0.97).unwrap();
        assert_eq!(out.samples()[0], 1.0);
        assert!((out.samples()[1] - 0.03).abs() < 1e-15);

        assert!(preemphasize(&c, 1.0).is_err());
        assert!(AudioClip::new(vec![], 16_000).is_err());
    }

    #[test]
    fn framing_counts() {
        let cfg = MfccConfig::default();
        assert_eq!(
            frame_and_window(&clip(vec![0.1; 400]), &cfg).unwrap().len(),
            1
        );
        assert_eq!(
            frame_and_window(&clip(vec![0.1; 560]), &cfg).unwrap().len(),
            2
        );
        assert_eq!(
            frame_and_window(&clip(vec![0.1; 559]), &cfg).unwrap().len(),
            1
        );
        assert!(matches!(
            frame_and_window(&clip(vec![0.1; 399]), &cfg),
            Err(Error::TooShort {
                samples: 399,
                needed: 400
            })
        ));
    }

    #[test]
    fn window_of_ones_is_hamming() {
        let cfg = MfccConfig::default();
        let frames = frame_and_window(&clip(vec![1.0; 400]), &cfg).unwrap();
        assert_eq!(frames[0], hamming_window(400));
        assert!((frames[0][0] - 0.08).abs() < 1e-12);
    }

    #[test]
    fn silence_gives_constant_log_floor_cepstrum() {
        let cfg = MfccConfig::default();
        let seq = mfcc(&clip(vec![0.0; 1600]), &cfg).unwrap();
        let c0 = cfg.num_mel_filters as f64 * LOG_FLOOR.ln();
        for row in seq.frames() {
            assert!((row[0] - c0).abs() < 1e-9);
            assert!(row[1..].iter().all(|c| c.abs() < 1e-9));
        }
    }

    /// Naive DFT power spectrum, independent of rustfft.
    fn direct_power(frame: &[f64], n: usize) -> Vec<f64> {
        (0..=n / 2)
            .map(|k| {
                let (mut re, mut im) = (0.0, 0.0);
                for (i, &x) in frame.iter().enumerate() {
                    let ang = -2.0 * PI * (k * i) as f64 / n as f64;
                    re += x * ang.cos();
                    im += x * ang.sin();
                }
                re * re + im * im
            })
            .collect()
    }

    #[test]
    fn tone_peaks_at_nearest_filter() {
        let cfg = MfccConfig::default();
        let c = tone(1000.0, 400, 0.5);
        let energies = filterbank_energies(&c, &cfg).unwrap();
        let bank = MelFilterbank::new(cfg.num_mel_filters, cfg.fft_size, 16_000);

        let emph = preemphasize_samples(c.samples(), cfg.preemphasis_coeff);
        let windowed: Vec<f64> = emph
            .iter()
            .zip(hamming_window(400))
            .map(|(a, b)| a * b)
            .collect();
        let oracle = bank.apply(&direct_power(&windowed, cfg.fft_size));
        for (a, b) in energies[0].iter().zip(&oracle) {
            assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0));
        }

        let argmax = |v: &[f64]| {
            v.iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0
        };
        let nearest = argmax(
            &bank
                .centers_hz()
                .iter()
                .map(|c| -(c - 1000.0).abs())
                .collect::<Vec<_>>(),
        );
        assert_eq!(argmax(&energies[0]), nearest);
        assert_eq!(argmax(&oracle), nearest);
    }

    #[test]
    fn filterbank_covers_interior_bins() {
        let bank = MelFilterbank::new(26, 512, 16_000);
        let bin_hz = 16_000.0 / 512.0;
        let (first, last) = (bank.centers_hz()[0], *bank.centers_hz().last().unwrap());
        for k in 0..=256 {
            let f = k as f64 * bin_hz;
            if f >= first && f <= last {
                let s: f64 = bank.weights().iter().map(|w| w[k]).sum();
                assert!(s > 0.0, "bin {k} uncovered");
            }
        }
    }

    #[test]
    fn mfcc_is_deterministic() {
        let cfg = MfccConfig::default();
        let c = tone(440.0, 4000, 0.3);
        assert_eq!(mfcc(&c, &cfg).unwrap(), mfcc(&c, &cfg).unwrap());
    }

    #[test]
    fn deltas_of_constant_and_line() {
        let flat = FeatureSequence::from_rows(&vec![vec![2.0, -1.0]; 7], 10.0).unwrap();
        let d = append_deltas(&flat, 2).unwrap();
        assert_eq!(d.dim(), 4);
        assert!(d.frames().all(|r| r[2] == 0.0 && r[3] == 0.0));

        let slope = 0.7;
        let rows: Vec<Vec<f64>> = (0..10).map(|t| vec![slope * t as f64]).collect();
        let d = append_deltas(&FeatureSequence::from_rows(&rows, 10.0).unwrap(), 2).unwrap();
        for t in 2..8 {
            assert!((d.frame(t)[1] - slope).abs() < 1e-12);
        }

        let single = FeatureSequence::from_rows(&[vec![3.0, 4.0]], 10.0).unwrap();
        let d = append_deltas(&single, 2).unwrap();
        assert_eq!(d.frame(0), &[3.0, 4.0, 0.0, 0.0]);
    }

    #[test]
    fn filterbank_energy_scales_quadratically() {
        let cfg = MfccConfig::default();
        let base = tone(300.0, 1200, 0.2);
        let scaled = clip(base.samples().iter().map(|s| 3.0 * s).collect());
        let e1 = filterbank_energies(&base, &cfg).unwrap();
        let e2 = filterbank_energies(&scaled, &cfg).unwrap();
        let t1: f64 = e1.iter().flatten().sum();
        let t2: f64 = e2.iter().flatten().sum();
        assert!((t2 - 9.0 * t1).abs() < 1e-9 * t2);
    }

    proptest! {
        #[test]
        fn deltas_reverse_with_time(rows in prop::collection::vec(
            prop::collection::vec(-5.0f64..5.0, 3), 5..20), w in 1usize..4) {
            let seq = FeatureSequence::from_rows(&rows, 10.0).unwrap();
            let rev: Vec<Vec<f64>> = rows.iter().rev().cloned().collect();
            let fwd = append_deltas(&seq, w).unwrap();
            let bwd = append_deltas(&FeatureSequence::from_rows(&rev, 10.0).unwrap(), w).unwrap();
            let t_len = rows.len();
            for t in w..t_len.saturating_sub(w) {
                let a = fwd.frame(t);
                let b = bwd.frame(t_len - 1 - t);
                for d in 0..3 {
                    prop_assert!((a[3 + d] + b[3 + d]).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn mfcc_finite_for_finite_input(samples in prop::collection::vec(-1.0f64..1.0, 400..1200)) {
            let seq = mfcc(&clip(samples), &MfccConfig::default()).unwrap();
            prop_assert!(seq.as_flat().iter().all(|v| v.is_finite()));
        }
    }
}
