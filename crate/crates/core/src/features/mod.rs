//! Audio front-end: MFCC + delta observation vectors and per-frame prosody.

mod dump;
mod mfcc;
mod prosody;
mod wav;

pub use dump::{read_features, write_features, write_features_csv};
pub use mfcc::{
    append_deltas, extract_features, filterbank_energies, frame_and_window, hamming_window, mfcc,
    preemphasize, MelFilterbank, LOG_FLOOR,
};
pub use prosody::{
    estimate_f0, extract_prosody, prosody_track, summarize_segments, utterance_prosody,
    ProsodySegmentVector, ProsodyTrack, F0_MAX_HZ, F0_MIN_HZ,
};
pub use wav::{read_wav, write_wav};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A mono clip with samples normalised to `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    samples: Vec<f64>,
    sample_rate_hz: u32,
}

impl AudioClip {
    pub fn new(samples: Vec<f64>, sample_rate_hz: u32) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyInput("audio clip has no samples"));
        }
        if sample_rate_hz == 0 {
            return Err(Error::arg("sample rate must be positive"));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::Numeric("non-finite audio sample".into()));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Front-end parameters. Defaults are 25 ms / 10 ms framing at 16 kHz,
/// 512-point FFT, 26 mel filters, 16 cepstra (c0 included) and a ±2 frame
/// delta window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MfccConfig {
    pub sample_rate_hz: u32,
    pub preemphasis_coeff: f64,
    pub frame_length_ms: f64,
    pub frame_shift_ms: f64,
    pub fft_size: usize,
    pub num_mel_filters: usize,
    pub num_cepstra: usize,
    pub delta_window: usize,
}

impl Default for MfccConfig {
    fn default() -> Self {
        Self {
            sample_rate_hz: 16_000,
            preemphasis_coeff: 0.97,
            frame_length_ms: 25.0,
            frame_shift_ms: 10.0,
            fft_size: 512,
            num_mel_filters: 26,
            num_cepstra: 16,
            delta_window: 2,
        }
    }
}

impl MfccConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.preemphasis_coeff) {
            return Err(Error::config("preemphasis_coeff must lie in [0, 1)"));
        }
        if !(self.frame_length_ms > 0.0 && self.frame_shift_ms > 0.0) {
            return Err(Error::config("frame length and shift must be positive"));
        }
        if self.frame_shift_ms > self.frame_length_ms {
            return Err(Error::config("frame_shift_ms exceeds frame_length_ms"));
        }
        if self.sample_rate_hz == 0 {
            return Err(Error::config("sample_rate_hz must be positive"));
        }
        if !self.fft_size.is_power_of_two() {
            return Err(Error::config("fft_size must be a power of two"));
        }
        if self.fft_size < self.frame_samples(self.sample_rate_hz) {
            return Err(Error::config(format!(
                "fft_size {} is smaller than a frame ({} samples)",
                self.fft_size,
                self.frame_samples(self.sample_rate_hz)
            )));
        }
        if self.num_mel_filters == 0 || self.num_cepstra == 0 {
            return Err(Error::config("filter and cepstrum counts must be positive"));
        }
        if self.num_cepstra > self.num_mel_filters {
            return Err(Error::config("num_cepstra exceeds num_mel_filters"));
        }
        if self.delta_window == 0 {
            return Err(Error::config("delta_window must be at least 1"));
        }
        Ok(())
    }

    pub fn frame_samples(&self, rate: u32) -> usize {
        (self.frame_length_ms * rate as f64 / 1000.0).round() as usize
    }

    pub fn shift_samples(&self, rate: u32) -> usize {
        ((self.frame_shift_ms * rate as f64 / 1000.0).round() as usize).max(1)
    }

    /// Number of full frames a clip of `len` samples produces.
    pub fn num_frames(&self, len: usize, rate: u32) -> usize {
        let fl = self.frame_samples(rate);
        if len < fl {
            0
        } else {
            1 + (len - fl) / self.shift_samples(rate)
        }
    }

    /// Observation dimensionality after deltas.
    pub fn feature_dim(&self) -> usize {
        2 * self.num_cepstra
    }

    /// Stable identifier of the feature pipeline, stored in model banks.
    pub fn fingerprint(&self) -> String {
        format!(
            "mfcc:sr={}:pre={}:len={}:shift={}:fft={}:mel={}:cep={}:dw={}:dim={}",
            self.sample_rate_hz,
            self.preemphasis_coeff,
            self.frame_length_ms,
            self.frame_shift_ms,
            self.fft_size,
            self.num_mel_filters,
            self.num_cepstra,
            self.delta_window,
            self.feature_dim()
        )
    }
}

/// A `T × D` matrix of observation vectors, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSequence {
    data: Vec<f64>,
    dim: usize,
    frame_shift_ms: f64,
}

impl FeatureSequence {
    pub fn from_flat(data: Vec<f64>, dim: usize, frame_shift_ms: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::arg("feature dimension must be positive"));
        }
        if data.is_empty() {
            return Err(Error::EmptyInput("feature sequence has no frames"));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::arg(format!(
                "{} values do not form rows of {dim}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite feature value".into()));
        }
        Ok(Self {
            data,
            dim,
            frame_shift_ms,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], frame_shift_ms: f64) -> Result<Self> {
        let dim = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::arg("ragged feature rows"));
        }
        Self::from_flat(rows.concat(), dim, frame_shift_ms)
    }

    pub fn num_frames(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn frame_shift_ms(&self) -> f64 {
        self.frame_shift_ms
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }

    pub fn frames(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }
}
