//! Feature dump format: little-endian `u32 T`, `u32 D`, then `T × D` `f64`
//! values row-major. A CSV export with the same content exists for debugging.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::FeatureSequence;
use crate::error::{Error, Result};

pub fn write_features(path: &Path, seq: &FeatureSequence) -> Result<()> {
    let mut buf = Vec::with_capacity(8 + seq.as_flat().len() * 8);
    buf.extend_from_slice(&(seq.num_frames() as u32).to_le_bytes());
    buf.extend_from_slice(&(seq.dim() as u32).to_le_bytes());
    for v in seq.as_flat() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

/// Reads a dump. The frame shift is not stored in the file, so the caller
/// supplies it.
pub fn read_features(path: &Path, frame_shift_ms: f64) -> Result<FeatureSequence> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let bad = |reason: String| Error::Format {
        what: "feature file",
        reason: format!("{}: {reason}", path.display()),
    };
    if bytes.len() < 8 {
        return Err(bad("truncated header".into()));
    }
    let t = u32::from_le_bytes(bytes[0..4].try_into().unwrap()) as usize;
    let d = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let expected = 8 + t * d * 8;
    if bytes.len() != expected {
        return Err(bad(format!(
            "expected {expected} bytes, found {}",
            bytes.len()
        )));
    }
    let data = bytes[8..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    FeatureSequence::from_flat(data, d, frame_shift_ms)
}

pub fn write_features_csv(path: &Path, seq: &FeatureSequence) -> Result<()> {
    let mut out = Vec::new();
    let header: Vec<String> = (0..seq.dim()).map(|d| format!("f{d}")).collect();
    writeln!(out, "{}", header.join(",")).expect("write to Vec");
    for row in seq.frames() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        writeln!(out, "{}", cells.join(",")).expect("write to Vec");
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn layout_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.feat");
        let seq = FeatureSequence::from_rows(&[vec![1.0, -2.5], vec![0.125, 3.0]], 10.0).unwrap();
        write_features(&path, &seq).unwrap();
        let bytes = fs::read(&path).unwrap();
        assert_eq!(&bytes[0..4], &2u32.to_le_bytes());
        assert_eq!(&bytes[4..8], &2u32.to_le_bytes());
        assert_eq!(&bytes[8..16], &1.0f64.to_le_bytes());
        assert_eq!(&bytes[16..24], &(-2.5f64).to_le_bytes());
        assert_eq!(bytes.len(), 8 + 4 * 8);

        fs::write(&path, &bytes[..20]).unwrap();
        assert!(matches!(
            read_features(&path, 10.0),
            Err(Error::Format { .. })
        ));
    }

    #[test]
    fn csv_export() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        let seq = FeatureSequence::from_rows(&[vec![1.0, 2.0]], 10.0).unwrap();
        write_features_csv(&path, &seq).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("f0,f1"));
        let vals: Vec<f64> = lines
            .next()
            .unwrap()
            .split(',')
            .map(|s| s.parse().unwrap())
            .collect();
        assert_eq!(vals, vec![1.0, 2.0]);
    }

    proptest! {
        #[test]
        fn round_trip(t in 1usize..20, d in 1usize..6, seed in any::<u64>()) {
            let data: Vec<f64> = (0..t * d)
                .map(|i| (seed.wrapping_add(i as u64) as f64).sin() * 1e3)
                .collect();
            let seq = FeatureSequence::from_flat(data, d, 10.0).unwrap();
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("f.feat");
            write_features(&path, &seq).unwrap();
            prop_assert_eq!(read_features(&path, 10.0).unwrap(), seq);
        }
    }
}
