use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::synthetic::SyntheticCorpus;
use super::UtteranceRecord;
use crate::classify::{EmotionLabel, LabelSet, Observation};
use crate::error::{Error, Result};
use crate::features::{read_features, write_features, FeatureSequence, ProsodyTrack};

pub const CORPUS_FORMAT: &str = "suprahmm/corpus";
const INDEX: &str = "corpus.json";
const FEATURE_DIR: &str = "features";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusUtterance {
    pub id: String,
    pub speaker: String,
    pub emotion: EmotionLabel,
    pub text: String,
    pub replicate: u32,
    pub frames: usize,
    /// Paths relative to the corpus directory.
    pub features: String,
    pub prosody: Option<String>,
}

/// `corpus.json`: what produced the features plus one entry per utterance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusIndex {
    pub format: String,
    pub version: u32,
    pub fingerprint: String,
    pub dim: usize,
    pub frame_shift_ms: f64,
    pub labels: LabelSet,
    pub tool_version: String,
    /// Synthetic spec or extraction config that produced the corpus.
    pub source: serde_json::Value,
    pub utterances: Vec<CorpusUtterance>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedCorpus {
    pub index: CorpusIndex,
    pub records: Vec<UtteranceRecord>,
    pub label_indices: Vec<usize>,
    pub observations: Vec<Observation>,
}

impl LoadedCorpus {
    pub fn labels(&self) -> &LabelSet {
        &self.index.labels
    }

    pub fn fingerprint(&self) -> &str {
        &self.index.fingerprint
    }

    pub fn labelled(&self, indices: &[usize]) -> Vec<(usize, &Observation)> {
        indices
            .iter()
            .map(|&i| (self.label_indices[i], &self.observations[i]))
            .collect()
    }
}

fn check_id(id: &str) -> Result<()> {
    let ok = !id.is_empty()
        && !id.starts_with('.')
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
    if ok {
        Ok(())
    } else {
        Err(Error::arg(format!(
            "utterance id {id:?} is not usable as a file name"
        )))
    }
}

/// Writes `features/<id>.feat`, `features/<id>.prosody` (3 columns:
/// `ln F0`, voiced flag, log energy) and `corpus.json`.
pub fn write_corpus(
    dir: &Path,
    fingerprint: &str,
    labels: &LabelSet,
    source: serde_json::Value,
    records: &[UtteranceRecord],
    observations: &[Observation],
) -> Result<CorpusIndex> {
    if records.len() != observations.len() {
        return Err(Error::DimensionMismatch {
            expected: records.len(),
            actual: observations.len(),
        });
    }
    let first = observations.first().ok_or(Error::EmptyInput("corpus"))?;
    let (dim, shift) = (first.features.dim(), first.features.frame_shift_ms());
    let feat_dir = dir.join(FEATURE_DIR);
    fs::create_dir_all(&feat_dir).map_err(|e| Error::io(&feat_dir, e))?;
    let utterances = records
        .par_iter()
        .zip(observations)
        .map(|(r, obs)| {
            check_id(&r.id)?;
            if labels.index_of(r.emotion.as_str()).is_none() {
                return Err(Error::arg(format!(
                    "emotion {} is not in the label set",
                    r.emotion
                )));
            }
            if obs.features.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: obs.features.dim(),
                });
            }
            let features = format!("{FEATURE_DIR}/{}.feat", r.id);
            write_features(&dir.join(&features), &obs.features)?;
            let prosody = match &obs.prosody {
                Some(track) => {
                    let rel = format!("{FEATURE_DIR}/{}.prosody", r.id);
                    let seq = FeatureSequence::from_rows(&track.to_rows(), shift)?;
                    write_features(&dir.join(&rel), &seq)?;
                    Some(rel)
                }
                None => None,
            };
            Ok(CorpusUtterance {
                id: r.id.clone(),
                speaker: r.speaker.clone(),
                emotion: r.emotion.clone(),
                text: r.text.clone(),
                replicate: r.replicate,
                frames: obs.features.num_frames(),
                features,
                prosody,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let index = CorpusIndex {
        format: CORPUS_FORMAT.into(),
        version: 1,
        fingerprint: fingerprint.into(),
        dim,
        frame_shift_ms: shift,
        labels: labels.clone(),
        tool_version: crate::VERSION.into(),
        source,
        utterances,
    };
    let path = dir.join(INDEX);
    fs::write(&path, serde_json::to_string_pretty(&index)? + "\n")
        .map_err(|e| Error::io(&path, e))?;
    Ok(index)
}

pub fn read_corpus(dir: &Path) -> Result<LoadedCorpus> {
    let path = dir.join(INDEX);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let index: CorpusIndex = serde_json::from_str(&text)?;
    if index.format != CORPUS_FORMAT || index.version != 1 {
        return Err(Error::Format {
            what: "corpus index",
            reason: format!("unsupported format {} v{}", index.format, index.version),
        });
    }
    let loaded = index
        .utterances
        .par_iter()
        .map(|u| {
            check_id(&u.id)?;
            let label = index.labels.index_of(u.emotion.as_str()).ok_or_else(|| {
                Error::arg(format!("emotion {} is not in the label set", u.emotion))
            })?;
            let features = read_features(&dir.join(&u.features), index.frame_shift_ms)?;
            if features.dim() != index.dim || features.num_frames() != u.frames {
                return Err(Error::Format {
                    what: "corpus features",
                    reason: format!("{} does not match its index entry", u.features),
                });
            }
            let prosody = match &u.prosody {
                Some(rel) => {
                    let seq = read_features(&dir.join(rel), index.frame_shift_ms)?;
                    Some(ProsodyTrack::from_rows(seq.frames())?)
                }
                None => None,
            };
            let record = UtteranceRecord {
                id: u.id.clone(),
                path: None,
                speaker: u.speaker.clone(),
                emotion: u.emotion.clone(),
                text: u.text.clone(),
                replicate: u.replicate,
            };
            Ok((record, label, Observation::new(features, prosody)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = LoadedCorpus {
        index,
        records: Vec::with_capacity(loaded.len()),
        label_indices: Vec::with_capacity(loaded.len()),
        observations: Vec::with_capacity(loaded.len()),
    };
    for (r, l, o) in loaded {
        out.records.push(r);
        out.label_indices.push(l);
        out.observations.push(o);
    }
    Ok(out)
}

impl SyntheticCorpus {
    /// Writes the corpus with its spec recorded as the source.
    pub fn write(&self, dir: &Path) -> Result<CorpusIndex> {
        write_corpus(
            dir,
            &self.fingerprint(),
            &self.labels,
            serde_json::to_value(&self.spec)?,
            &self.records,
            &self.observations,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{synthesize_corpus, SyntheticSpec};

    #[test]
    fn round_trip() {
        let spec = SyntheticSpec {
            num_emotions: 2,
            num_speakers: 2,
            num_texts: 2,
            num_train_speakers: 1,
            num_train_texts: 1,
            replicates: 1,
            min_frames: 10,
            max_frames: 12,
            dim: 3,
            ..SyntheticSpec::default()
        };
        let corpus = synthesize_corpus(&spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let index = corpus.write(dir.path()).unwrap();
        assert_eq!(index.utterances.len(), 8);
        let back = read_corpus(dir.path()).unwrap();
        assert_eq!(back.observations, corpus.observations);
        assert_eq!(back.label_indices, corpus.label_indices);
        assert_eq!(back.records, corpus.records);
        let echoed: SyntheticSpec = serde_json::from_value(back.index.source.clone()).unwrap();
        assert_eq!(echoed, spec);
    }

    #[test]
    fn bad_ids_rejected() {
        assert!(check_id("../x").is_err());
        assert!(check_id("").is_err());
        assert!(check_id("neutral-spk01-txt01-r0").is_ok());
    }
}
