//! Labelled corpora: CSV manifests, speaker- and text-independent splits, the
//! synthetic generator and the on-disk corpus directory.

mod manifest;
mod split;
mod store;
mod synthetic;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::classify::EmotionLabel;

pub use manifest::{load_manifest, read_manifest, write_manifest};
pub use split::{make_split, Split, SplitSpec};
pub use store::{
    read_corpus, write_corpus, CorpusIndex, CorpusUtterance, LoadedCorpus, CORPUS_FORMAT,
};
pub use synthetic::{
    synthesize_corpus, ProsodyGenSpec, SyntheticCorpus, SyntheticSpec, SYNTHETIC_FINGERPRINT_PREFIX,
};

/// One labelled utterance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UtteranceRecord {
    pub id: String,
    /// Audio file, absent for synthetic utterances.
    pub path: Option<PathBuf>,
    pub speaker: String,
    pub emotion: EmotionLabel,
    pub text: String,
    pub replicate: u32,
}

impl UtteranceRecord {
    /// The `(speaker, text, emotion, replicate)` key that must be unique.
    pub fn key(&self) -> (&str, &str, &str, u32) {
        (
            &self.speaker,
            &self.text,
            self.emotion.as_str(),
            self.replicate,
        )
    }

    /// Stable string form of [`key`](Self::key), used for per-utterance seeds.
    pub fn key_string(&self) -> String {
        format!(
            "{}|{}|{}|{}",
            self.speaker, self.text, self.emotion, self.replicate
        )
    }
}
