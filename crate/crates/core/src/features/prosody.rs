use serde::{Deserialize, Serialize};

use super::{AudioClip, MfccConfig};
use crate::error::{Error, Result};

pub const F0_MIN_HZ: f64 = 60.0;
pub const F0_MAX_HZ: f64 = 400.0;

/// Normalised autocorrelation peak required to call a frame voiced.
const VOICING_THRESHOLD: f64 = 0.5;
/// Frames quieter than this RMS are unvoiced regardless of periodicity.
const SILENCE_RMS: f64 = 1e-4;
const ENERGY_FLOOR: f64 = 1e-10;

/// Per-frame prosodic measurements on the same frame grid as the MFCCs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProsodyTrack {
    /// `ln F0` for voiced frames, 0 for unvoiced frames.
    pub log_f0: Vec<f64>,
    pub voiced: Vec<bool>,
    pub log_energy: Vec<f64>,
}

impl ProsodyTrack {
    pub fn new(log_f0: Vec<f64>, voiced: Vec<bool>, log_energy: Vec<f64>) -> Result<Self> {
        if log_f0.len() != voiced.len() || log_f0.len() != log_energy.len() {
            return Err(Error::arg("prosody track columns differ in length"));
        }
        if log_f0.is_empty() {
            return Err(Error::EmptyInput("prosody track has no frames"));
        }
        if log_f0.iter().chain(&log_energy).any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite prosody value".into()));
        }
        Ok(Self {
            log_f0,
            voiced,
            log_energy,
        })
    }

    pub fn len(&self) -> usize {
        self.voiced.len()
    }

    pub fn is_empty(&self) -> bool {
        self.voiced.is_empty()
    }

    /// Rows of `[log_f0, voiced, log_energy]`, the on-disk layout.
    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.len())
            .map(|t| {
                vec![
                    self.log_f0[t],
                    if self.voiced[t] { 1.0 } else { 0.0 },
                    self.log_energy[t],
                ]
            })
            .collect()
    }

    pub fn from_rows<'a>(rows: impl IntoIterator<Item = &'a [f64]>) -> Result<Self> {
        let mut f0 = Vec::new();
        let mut voiced = Vec::new();
        let mut energy = Vec::new();
        for row in rows {
            if row.len() != 3 {
                return Err(Error::DimensionMismatch {
                    expected: 3,
                    actual: row.len(),
                });
            }
            f0.push(row[0]);
            voiced.push(row[1] > 0.5);
            energy.push(row[2]);
        }
        Self::new(f0, voiced, energy)
    }
}

/// Prosodic summary of one segment of frames.
///
/// Segments without voiced frames carry `mean_log_f0 = std_log_f0 = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProsodySegmentVector {
    pub mean_log_f0: f64,
    pub std_log_f0: f64,
    pub voiced_ratio: f64,
    pub mean_log_energy: f64,
    pub energy_range: f64,
    pub duration_frames: f64,
}

impl ProsodySegmentVector {
    pub const DIM: usize = 6;

    pub fn to_array(&self) -> [f64; 6] {
        [
            self.mean_log_f0,
            self.std_log_f0,
            self.voiced_ratio,
            self.mean_log_energy,
            self.energy_range,
            self.duration_frames,
        ]
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        Self {
            mean_log_f0: a[0],
            std_log_f0: a[1],
            voiced_ratio: a[2],
            mean_log_energy: a[3],
            energy_range: a[4],
            duration_frames: a[5],
        }
    }

    fn summarize(track: &ProsodyTrack, range: std::ops::Range<usize>) -> Self {
        let n = range.len();
        let voiced_f0: Vec<f64> = range
            .clone()
            .filter(|&t| track.voiced[t])
            .map(|t| track.log_f0[t])
            .collect();
        let (mean_f0, std_f0) = if voiced_f0.is_empty() {
            (0.0, 0.0)
        } else {
            let m = voiced_f0.iter().sum::<f64>() / voiced_f0.len() as f64;
            let v = voiced_f0.iter().map(|x| (x - m).powi(2)).sum::<f64>() / voiced_f0.len() as f64;
            (m, v.sqrt())
        };
        let energies = &track.log_energy[range];
        let mean_e = energies.iter().sum::<f64>() / n as f64;
        let max_e = energies.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min_e = energies.iter().copied().fold(f64::INFINITY, f64::min);
        Self {
            mean_log_f0: mean_f0,
            std_log_f0: std_f0,
            voiced_ratio: voiced_f0.len() as f64 / n as f64,
            mean_log_energy: mean_e,
            energy_range: max_e - min_e,
            duration_frames: n as f64,
        }
    }
}

/// Autocorrelation F0 estimate for one analysis window, searched over
/// 60–400 Hz. Returns `None` for unvoiced input.
pub fn estimate_f0(window: &[f64], sample_rate_hz: u32) -> Option<f64> {
    let rate = sample_rate_hz as f64;
    let min_lag = (rate / F0_MAX_HZ).floor().max(1.0) as usize;
    let mut max_lag = (rate / F0_MIN_HZ).ceil() as usize;
    // Need at least two periods of overlap for a stable estimate.
    max_lag = max_lag.min(window.len() / 2);
    if max_lag <= min_lag + 1 {
        return None;
    }
    let mean = window.iter().sum::<f64>() / window.len() as f64;
    let x: Vec<f64> = window.iter().map(|s| s - mean).collect();
    let rms = (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt();
    if rms < SILENCE_RMS {
        return None;
    }

    let corr = |lag: usize| -> f64 {
        let a = &x[..x.len() - lag];
        let b = &x[lag..];
        let num: f64 = a.iter().zip(b).map(|(p, q)| p * q).sum();
        let ea: f64 = a.iter().map(|v| v * v).sum();
        let eb: f64 = b.iter().map(|v| v * v).sum();
        let den = (ea * eb).sqrt();
        if den > 0.0 {
            num / den
        } else {
            0.0
        }
    };
    // One extra lag on each side for peak picking and interpolation.
    let lo = min_lag - 1;
    let r: Vec<f64> = (lo..=max_lag + 1).map(corr).collect();
    let at = |lag: usize| r[lag - lo];

    let best = (min_lag..=max_lag)
        .map(at)
        .fold(f64::NEG_INFINITY, f64::max);
    if best < VOICING_THRESHOLD {
        return None;
    }
    // Shortest-lag local peak close to the best one avoids subharmonic picks.
    let lag = (min_lag..=max_lag)
        .find(|&l| at(l) >= 0.9 * best && at(l) >= at(l - 1) && at(l) >= at(l + 1))?;
    let (y0, y1, y2) = (at(lag - 1), at(lag), at(lag + 1));
    let denom = y0 - 2.0 * y1 + y2;
    let shift = if denom.abs() > 1e-12 {
        (0.5 * (y0 - y2) / denom).clamp(-0.5, 0.5)
    } else {
        0.0
    };
    Some(rate / (lag as f64 + shift))
}

/// Per-frame F0, voicing and log energy on the MFCC frame grid.
pub fn prosody_track(clip: &AudioClip, cfg: &MfccConfig) -> Result<ProsodyTrack> {
    let rate = clip.sample_rate_hz();
    let x = clip.samples();
    let frame_len = cfg.frame_samples(rate);
    let shift = cfg.shift_samples(rate);
    let count = cfg.num_frames(x.len(), rate);
    if count == 0 {
        return Err(Error::TooShort {
            samples: x.len(),
            needed: frame_len,
        });
    }
    let pitch_len = frame_len.max(2 * (rate as f64 / F0_MIN_HZ).ceil() as usize);
    let mut log_f0 = Vec::with_capacity(count);
    let mut voiced = Vec::with_capacity(count);
    let mut log_energy = Vec::with_capacity(count);
    for t in 0..count {
        let start = t * shift;
        let frame = &x[start..start + frame_len];
        let energy = frame.iter().map(|s| s * s).sum::<f64>() / frame_len as f64;
        log_energy.push(energy.max(ENERGY_FLOOR).ln());
        let window = &x[start..(start + pitch_len).min(x.len())];
        match estimate_f0(window, rate) {
            Some(f0) => {
                log_f0.push(f0.ln());
                voiced.push(true);
            }
            None => {
                log_f0.push(0.0);
                voiced.push(false);
            }
        }
    }
    ProsodyTrack::new(log_f0, voiced, log_energy)
}

/// Summarises a prosody track per segment. `alignment[t]` is the segment id of
/// frame `t`; ids must start at 0 and increase by at most one per frame.
pub fn summarize_segments(
    track: &ProsodyTrack,
    alignment: &[usize],
) -> Result<Vec<ProsodySegmentVector>> {
    if alignment.len() != track.len() {
        return Err(Error::DimensionMismatch {
            expected: track.len(),
            actual: alignment.len(),
        });
    }
    if alignment.first() != Some(&0) {
        return Err(Error::DegenerateSegment(
            "alignment must start with segment 0".into(),
        ));
    }
    let mut out = Vec::new();
    let mut start = 0;
    for t in 1..=alignment.len() {
        if t == alignment.len() || alignment[t] != alignment[t - 1] {
            if t < alignment.len() && alignment[t] != alignment[t - 1] + 1 {
                return Err(Error::DegenerateSegment(format!(
                    "segment ids jump from {} to {} at frame {t}",
                    alignment[t - 1],
                    alignment[t]
                )));
            }
            out.push(ProsodySegmentVector::summarize(track, start..t));
            start = t;
        }
    }
    Ok(out)
}

/// Whole-utterance prosody vector, the observation of the top-level state.
pub fn utterance_prosody(track: &ProsodyTrack) -> ProsodySegmentVector {
    ProsodySegmentVector::summarize(track, 0..track.len())
}

pub fn extract_prosody(
    clip: &AudioClip,
    cfg: &MfccConfig,
    alignment: &[usize],
) -> Result<Vec<ProsodySegmentVector>> {
    summarize_segments(&prosody_track(clip, cfg)?, alignment)
}
