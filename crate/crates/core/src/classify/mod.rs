//! Per-emotion model banks and the argmax recognizer, plus the GMM and VQ
//! baselines.

mod bank;
mod baseline;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureSequence, ProsodyTrack};

pub use bank::{
    argmax_label, BankConfig, BankManifest, Classification, EmotionModel, ModelBank, ModelEntry,
    BANK_FORMAT,
};
pub use baseline::{
    lbg_codebook, train_gmm, GmmBaselineModel, GmmOptions, GmmOutcome, VqBaselineModel,
};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmotionLabel(String);

impl EmotionLabel {
    pub fn new(name: impl Into<String>) -> Result<Self> {
        let name = name.into();
        let ok = !name.is_empty()
            && name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
        if !ok {
            return Err(Error::config(format!("invalid emotion label {name:?}")));
        }
        Ok(Self(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for EmotionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Closed, ordered set of emotions for one experiment. Order breaks ties.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<EmotionLabel>", into = "Vec<EmotionLabel>")]
pub struct LabelSet {
    labels: Vec<EmotionLabel>,
}

pub const DEFAULT_EMOTIONS: [&str; 6] = [
    "neutral",
    "hot_anger",
    "sadness",
    "happiness",
    "disgust",
    "panic",
];

impl LabelSet {
    pub fn new(labels: Vec<EmotionLabel>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::config("label set is empty"));
        }
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(Error::config(format!("label {l} listed twice")));
            }
        }
        Ok(Self { labels })
    }

    pub fn from_names<S: AsRef<str>>(names: &[S]) -> Result<Self> {
        Self::new(
            names
                .iter()
                .map(|n| EmotionLabel::new(n.as_ref()))
                .collect::<Result<_>>()?,
        )
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[EmotionLabel] {
        &self.labels
    }

    pub fn get(&self, index: usize) -> &EmotionLabel {
        &self.labels[index]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.labels.iter().position(|l| l.as_str() == name)
    }
}

impl Default for LabelSet {
    fn default() -> Self {
        Self::from_names(&DEFAULT_EMOTIONS).unwrap()
    }
}

impl TryFrom<Vec<EmotionLabel>> for LabelSet {
    type Error = Error;

    fn try_from(labels: Vec<EmotionLabel>) -> Result<Self> {
        Self::new(labels)
    }
}

impl From<LabelSet> for Vec<EmotionLabel> {
    fn from(set: LabelSet) -> Self {
        set.labels
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BankKind {
    #[serde(rename = "CSPHMM3")]
    Csphmm3,
    #[serde(rename = "CHMM3")]
    Chmm3,
    #[serde(rename = "GMM")]
    Gmm,
    #[serde(rename = "VQ")]
    Vq,
}

impl BankKind {
    pub const ALL: [BankKind; 4] = [
        BankKind::Csphmm3,
        BankKind::Chmm3,
        BankKind::Gmm,
        BankKind::Vq,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BankKind::Csphmm3 => "CSPHMM3",
            BankKind::Chmm3 => "CHMM3",
            BankKind::Gmm => "GMM",
            BankKind::Vq => "VQ",
        }
    }
}

impl fmt::Display for BankKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BankKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BankKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::config(format!("unknown bank kind {s:?}")))
    }
}

/// One utterance as seen by a classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub features: FeatureSequence,
    /// Per-frame prosody; required by CSPHMM3 banks only.
    pub prosody: Option<ProsodyTrack>,
}

impl Observation {
    pub fn new(features: FeatureSequence, prosody: Option<ProsodyTrack>) -> Result<Self> {
        if let Some(p) = &prosody {
            if p.len() != features.num_frames() {
                return Err(Error::DimensionMismatch {
                    expected: features.num_frames(),
                    actual: p.len(),
                });
            }
        }
        Ok(Self { features, prosody })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_labels() {
        let l = LabelSet::default();
        assert_eq!(l.len(), 6);
        assert_eq!(l.index_of("panic"), Some(5));
        assert!(LabelSet::from_names(&["a", "a"]).is_err());
        assert!(EmotionLabel::new("bad label").is_err());
        let json = serde_json::to_string(&l).unwrap();
        assert_eq!(serde_json::from_str::<LabelSet>(&json).unwrap(), l);
    }

    #[test]
    fn kind_names() {
        for k in BankKind::ALL {
            assert_eq!(k.name().parse::<BankKind>().unwrap(), k);
        }
        assert_eq!("chmm3".parse::<BankKind>().unwrap(), BankKind::Chmm3);
        assert!("svm".parse::<BankKind>().is_err());
    }
}
