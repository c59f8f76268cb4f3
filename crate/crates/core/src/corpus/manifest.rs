use std::collections::HashSet;
use std::fs::File;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::UtteranceRecord;
use crate::classify::{EmotionLabel, LabelSet};
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    id: String,
    path: String,
    speaker: String,
    emotion: String,
    text: String,
    replicate: u32,
}

/// Reads a `id,path,speaker,emotion,text,replicate` CSV. Paths are resolved
/// against the manifest's directory and must exist. Rows whose emotion is not
/// in `labels` are skipped.
pub fn load_manifest(path: &Path, labels: &LabelSet) -> Result<Vec<UtteranceRecord>> {
    let records = read_manifest(path, labels)?;
    for r in &records {
        if let Some(audio) = r.path.as_ref().filter(|p| !p.is_file()) {
            return Err(Error::MissingAudio(audio.clone()));
        }
    }
    Ok(records)
}

/// Like [`load_manifest`] but leaves audio existence to the caller.
pub fn read_manifest(path: &Path, labels: &LabelSet) -> Result<Vec<UtteranceRecord>> {
    let base = path.parent().unwrap_or_else(|| Path::new(""));
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(file);
    let mut seen = HashSet::new();
    let mut ids = HashSet::new();
    let mut out = Vec::new();
    let mut skipped = 0usize;
    for row in reader.deserialize::<Row>() {
        let row = row?;
        if labels.index_of(&row.emotion).is_none() {
            skipped += 1;
            continue;
        }
        let rec = UtteranceRecord {
            id: row.id,
            path: Some(base.join(&row.path)),
            speaker: row.speaker,
            emotion: EmotionLabel::new(row.emotion)?,
            text: row.text,
            replicate: row.replicate,
        };
        if !seen.insert(rec.key_string()) {
            return Err(Error::DuplicateKey {
                speaker: rec.speaker,
                text: rec.text,
                emotion: rec.emotion.to_string(),
                replicate: rec.replicate,
            });
        }
        if !ids.insert(rec.id.clone()) {
            return Err(Error::Format {
                what: "manifest",
                reason: format!("utterance id {:?} appears twice", rec.id),
            });
        }
        out.push(rec);
    }
    if skipped > 0 {
        log::warn!("{skipped} manifest rows carry emotions outside the label set and were skipped");
    }
    Ok(out)
}

/// Writes records as a manifest; audio paths are written as given.
pub fn write_manifest(path: &Path, records: &[UtteranceRecord]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    for r in records {
        w.serialize(Row {
            id: r.id.clone(),
            path: r
                .path
                .as_ref()
                .map(|p| p.to_string_lossy().into_owned())
                .unwrap_or_default(),
            speaker: r.speaker.clone(),
            emotion: r.emotion.to_string(),
            text: r.text.clone(),
            replicate: r.replicate,
        })?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    const HEADER: &str = "id,path,speaker,emotion,text,replicate\n";

    #[test]
    fn empty_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        fs::write(&p, HEADER).unwrap();
        assert!(load_manifest(&p, &LabelSet::default()).unwrap().is_empty());
    }

    #[test]
    fn duplicates_missing_and_filtering() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("a.wav"), b"").unwrap();
        let p = dir.path().join("m.csv");
        fs::write(
            &p,
            format!("{HEADER}u1,a.wav,s1,neutral,t1,0\nu2,a.wav,s1,boredom,t1,0\n"),
        )
        .unwrap();
        let recs = load_manifest(&p, &LabelSet::default()).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(
            recs[0].path.as_deref(),
            Some(dir.path().join("a.wav").as_path())
        );

        fs::write(
            &p,
            format!("{HEADER}u1,a.wav,s1,neutral,t1,0\nu2,a.wav,s1,neutral,t1,0\n"),
        )
        .unwrap();
        assert!(matches!(
            load_manifest(&p, &LabelSet::default()),
            Err(Error::DuplicateKey { .. })
        ));

        fs::write(&p, format!("{HEADER}u1,b.wav,s1,neutral,t1,0\n")).unwrap();
        assert!(matches!(
            load_manifest(&p, &LabelSet::default()),
            Err(Error::MissingAudio(_))
        ));

        fs::write(&p, format!("{HEADER}u1,a.wav,s1,neutral,t1,zero\n")).unwrap();
        assert!(matches!(
            load_manifest(&p, &LabelSet::default()),
            Err(Error::Csv(_))
        ));
    }

    #[test]
    fn assessment_set_has_480_rows() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("x.wav"), b"").unwrap();
        let mut text = HEADER.to_string();
        for s in 0..8 {
            for e in crate::classify::DEFAULT_EMOTIONS {
                for t in 0..10 {
                    text.push_str(&format!("{s}-{e}-{t},x.wav,s{s},{e},t{t},0\n"));
                }
            }
        }
        let p = dir.path().join("m.csv");
        fs::write(&p, text).unwrap();
        let recs = load_manifest(&p, &LabelSet::default()).unwrap();
        assert_eq!(recs.len(), 480);
        let out = dir.path().join("out.csv");
        write_manifest(&out, &recs).unwrap();
        assert_eq!(load_manifest(&out, &LabelSet::default()).unwrap(), recs);
    }
}
