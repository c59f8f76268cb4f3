use std::path::Path;

use super::AudioClip;
use crate::error::{Error, Result};

/// Reads a mono 16-bit PCM WAV file. Any other layout, or a sample rate other
/// than `expected_rate_hz`, is rejected; resampling is not performed.
pub fn read_wav(path: &Path, expected_rate_hz: u32) -> Result<AudioClip> {
    if !path.exists() {
        return Err(Error::MissingAudio(path.to_path_buf()));
    }
    let mut reader = hound::WavReader::open(path)?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::UnsupportedAudio(format!(
            "{}: {} channels, expected mono",
            path.display(),
            spec.channels
        )));
    }
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(Error::UnsupportedAudio(format!(
            "{}: expected 16-bit PCM",
            path.display()
        )));
    }
    if spec.sample_rate != expected_rate_hz {
        return Err(Error::UnsupportedAudio(format!(
            "{}: sample rate {} Hz, expected {} Hz",
            path.display(),
            spec.sample_rate,
            expected_rate_hz
        )));
    }
    let samples = reader
        .samples::<i16>()
        .map(|s| s.map(|v| v as f64 / 32768.0))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    AudioClip::new(samples, spec.sample_rate)
}

/// Writes a clip as mono 16-bit PCM, clipping to the representable range.
pub fn write_wav(path: &Path, clip: &AudioClip) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: clip.sample_rate_hz(),
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec)?;
    for &s in clip.samples() {
        writer.write_sample((s * 32768.0).round().clamp(-32768.0, 32767.0) as i16)?;
    }
    writer.finalize()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_rate_check() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.wav");
        let clip = AudioClip::new(vec![0.0, 0.5, -0.5, 0.25], 16_000).unwrap();
        write_wav(&path, &clip).unwrap();
        let back = read_wav(&path, 16_000).unwrap();
        for (a, b) in clip.samples().iter().zip(back.samples()) {
            assert!((a - b).abs() < 1.0 / 32768.0);
        }
        assert!(matches!(
            read_wav(&path, 8_000),
            Err(Error::UnsupportedAudio(_))
        ));
        assert!(matches!(
            read_wav(&dir.path().join("missing.wav"), 16_000),
            Err(Error::MissingAudio(_))
        ));
    }

    #[test]
    fn stereo_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.wav");
        let spec = hound::WavSpec {
            channels: 2,
            sample_rate: 16_000,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let mut w = hound::WavWriter::create(&path, spec).unwrap();
        w.write_sample(0i16).unwrap();
        w.write_sample(0i16).unwrap();
        w.finalize().unwrap();
        assert!(matches!(
            read_wav(&path, 16_000),
            Err(Error::UnsupportedAudio(_))
        ));
    }
}
