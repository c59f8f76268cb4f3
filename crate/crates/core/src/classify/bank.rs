use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::baseline::{lbg_codebook, train_gmm, GmmBaselineModel, GmmOptions, VqBaselineModel};
use super::{BankKind, LabelSet, Observation};
use crate::error::{Error, Result};
use crate::features::{FeatureSequence, ProsodyTrack};
use crate::hmm::{forward_log_likelihood, train_circular_chain, HmmModel, HmmTrainConfig};
use crate::numeric::fnv1a64;
use crate::supra::{Csphmm3Model, FusedScore, SupraOptions, SuprasegmentalLayout};

pub const BANK_FORMAT: &str = "suprahmm/model-bank";
const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BankConfig {
    pub kind: BankKind,
    pub hmm: HmmTrainConfig,
    pub supra: SupraOptions,
    pub alpha: f64,
    pub gmm: GmmOptions,
    pub vq_codebook_size: usize,
    pub seed: u64,
}

impl Default for BankConfig {
    fn default() -> Self {
        Self {
            kind: BankKind::Csphmm3,
            hmm: HmmTrainConfig::default(),
            supra: SupraOptions::default(),
            alpha: 0.5,
            gmm: GmmOptions::default(),
            vq_codebook_size: 64,
            seed: 1,
        }
    }
}

impl BankConfig {
    pub fn validate(&self) -> Result<()> {
        self.hmm.validate()?;
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::config(format!(
                "alpha {} outside [0, 1]",
                self.alpha
            )));
        }
        if self.gmm.num_mixtures == 0 || self.vq_codebook_size == 0 {
            return Err(Error::config(
                "GMM mixtures and VQ codebook size must be positive",
            ));
        }
        Ok(())
    }

    /// Seed for one emotion, independent of the label's position in the set.
    pub fn label_seed(&self, label: &str) -> u64 {
        self.seed ^ fnv1a64(label.as_bytes())
    }
}

/// Reference model of one emotion.
#[derive(Debug, Clone, PartialEq)]
pub enum EmotionModel {
    Csphmm3(Csphmm3Model),
    Chmm3(HmmModel),
    Gmm(GmmBaselineModel),
    Vq(VqBaselineModel),
}

impl EmotionModel {
    pub fn kind(&self) -> BankKind {
        match self {
            EmotionModel::Csphmm3(_) => BankKind::Csphmm3,
            EmotionModel::Chmm3(_) => BankKind::Chmm3,
            EmotionModel::Gmm(_) => BankKind::Gmm,
            EmotionModel::Vq(_) => BankKind::Vq,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            EmotionModel::Csphmm3(m) => m.acoustic().dim(),
            EmotionModel::Chmm3(m) => m.dim(),
            EmotionModel::Gmm(m) => m.dim(),
            EmotionModel::Vq(m) => m.dim(),
        }
    }

    fn to_json(&self) -> Result<String> {
        Ok(match self {
            EmotionModel::Csphmm3(m) => m.to_json()?,
            EmotionModel::Chmm3(m) => m.to_json()?,
            EmotionModel::Gmm(m) => serde_json::to_string_pretty(m)?,
            EmotionModel::Vq(m) => serde_json::to_string_pretty(m)?,
        })
    }

    fn from_json(kind: BankKind, text: &str) -> Result<Self> {
        Ok(match kind {
            BankKind::Csphmm3 => EmotionModel::Csphmm3(Csphmm3Model::from_json(text)?),
            BankKind::Chmm3 => EmotionModel::Chmm3(HmmModel::from_json(text)?),
            BankKind::Gmm => {
                let m: GmmBaselineModel = serde_json::from_str(text)?;
                m.validate()?;
                EmotionModel::Gmm(m)
            }
            BankKind::Vq => {
                let m: VqBaselineModel = serde_json::from_str(text)?;
                m.validate()?;
                EmotionModel::Vq(m)
            }
        })
    }

    fn score(&self, obs: &Observation, alpha: f64) -> Result<f64> {
        Ok(match self {
            EmotionModel::Csphmm3(m) => m.score(&obs.features, require_prosody(obs)?)?.fused(alpha),
            EmotionModel::Chmm3(m) => forward_log_likelihood(m, &obs.features)?,
            EmotionModel::Gmm(m) => m.score(obs.features.frames()),
            EmotionModel::Vq(m) => m.score(obs.features.frames()),
        })
    }
}

fn require_prosody(obs: &Observation) -> Result<&ProsodyTrack> {
    obs.prosody
        .as_ref()
        .ok_or_else(|| Error::arg("CSPHMM3 scoring needs a prosody track"))
}

/// Decision and full score vector for one utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub label: usize,
    pub scores: Vec<f64>,
}

/// Index of the largest score; the first label wins ties and NaN never wins.
pub fn argmax_label(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] || (scores[best].is_nan() && !s.is_nan()) {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEntry {
    pub label: String,
    pub file: String,
}

/// Contents of `manifest.json` in a bank directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankManifest {
    pub format: String,
    pub version: u32,
    pub kind: BankKind,
    pub labels: LabelSet,
    pub fingerprint: String,
    pub alpha: f64,
    pub config: BankConfig,
    pub models: Vec<ModelEntry>,
}

/// One model per emotion label, all over the same features.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelBank {
    config: BankConfig,
    labels: LabelSet,
    fingerprint: String,
    models: Vec<EmotionModel>,
}

fn train_one(
    config: &BankConfig,
    label: &str,
    utterances: &[&Observation],
) -> Result<EmotionModel> {
    let seed = config.label_seed(label);
    let features: Vec<FeatureSequence> = utterances.iter().map(|o| o.features.clone()).collect();
    let frames = || {
        features
            .iter()
            .flat_map(|f| f.frames())
            .collect::<Vec<&[f64]>>()
    };
    Ok(match config.kind {
        BankKind::Csphmm3 | BankKind::Chmm3 => {
            let hmm = HmmTrainConfig {
                seed,
                ..config.hmm.clone()
            };
            let acoustic = train_circular_chain(&features, &hmm)?.model;
            if config.kind == BankKind::Chmm3 {
                EmotionModel::Chmm3(acoustic)
            } else {
                let pairs = utterances
                    .iter()
                    .map(|o| Ok((&o.features, require_prosody(o)?)))
                    .collect::<Result<Vec<_>>>()?;
                let layout = SuprasegmentalLayout::halves(acoustic.num_states())?;
                EmotionModel::Csphmm3(Csphmm3Model::train(
                    acoustic,
                    layout,
                    &pairs,
                    config.alpha,
                    &config.supra,
                )?)
            }
        }
        BankKind::Gmm => EmotionModel::Gmm(train_gmm(&frames(), &config.gmm, seed)?.model),
        BankKind::Vq => EmotionModel::Vq(lbg_codebook(&frames(), config.vq_codebook_size, seed)?),
    })
}

impl ModelBank {
    /// Trains one model per label. `corpus` pairs a label index with an
    /// utterance; every label needs at least one utterance.
    pub fn train(
        config: &BankConfig,
        labels: &LabelSet,
        fingerprint: &str,
        corpus: &[(usize, &Observation)],
    ) -> Result<Self> {
        config.validate()?;
        let mut grouped: Vec<Vec<&Observation>> = vec![Vec::new(); labels.len()];
        for &(l, obs) in corpus {
            if l >= labels.len() {
                return Err(Error::arg(format!("label index {l} outside the label set")));
            }
            grouped[l].push(obs);
        }
        if let Some(missing) = grouped.iter().position(|g| g.is_empty()) {
            return Err(Error::IncompleteBank(format!(
                "no training utterances for emotion {}",
                labels.get(missing)
            )));
        }
        let models = grouped
            .par_iter()
            .enumerate()
            .map(|(l, utts)| train_one(config, labels.get(l).as_str(), utts))
            .collect::<Result<Vec<_>>>()?;
        Self::from_models(
            config.clone(),
            labels.clone(),
            fingerprint.to_string(),
            models,
        )
    }

    pub fn from_models(
        config: BankConfig,
        labels: LabelSet,
        fingerprint: String,
        models: Vec<EmotionModel>,
    ) -> Result<Self> {
        config.validate()?;
        if models.len() != labels.len() {
            return Err(Error::IncompleteBank(format!(
                "{} models for {} labels",
                models.len(),
                labels.len()
            )));
        }
        let dim = models[0].dim();
        for m in &models {
            if m.kind() != config.kind {
                return Err(Error::config(format!(
                    "{} model in a {} bank",
                    m.kind(),
                    config.kind
                )));
            }
            if m.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: m.dim(),
                });
            }
        }
        let models = models
            .into_iter()
            .map(|m| match m {
                EmotionModel::Csphmm3(c) => c.with_alpha(config.alpha).map(EmotionModel::Csphmm3),
                other => Ok(other),
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            config,
            labels,
            fingerprint,
            models,
        })
    }

    pub fn kind(&self) -> BankKind {
        self.config.kind
    }

    pub fn config(&self) -> &BankConfig {
        &self.config
    }

    pub fn labels(&self) -> &LabelSet {
        &self.labels
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn alpha(&self) -> f64 {
        self.config.alpha
    }

    pub fn models(&self) -> &[EmotionModel] {
        &self.models
    }

    pub fn dim(&self) -> usize {
        self.models[0].dim()
    }

    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        let config = BankConfig {
            alpha,
            ..self.config.clone()
        };
        Self::from_models(
            config,
            self.labels.clone(),
            self.fingerprint.clone(),
            self.models.clone(),
        )
    }

    /// CHMM3 bank sharing this CSPHMM3 bank's acoustic models.
    pub fn acoustic_bank(&self) -> Result<Self> {
        let models = self
            .models
            .iter()
            .map(|m| match m {
                EmotionModel::Csphmm3(c) => Ok(EmotionModel::Chmm3(c.acoustic().clone())),
                _ => Err(Error::arg("acoustic_bank needs a CSPHMM3 bank")),
            })
            .collect::<Result<Vec<_>>>()?;
        let config = BankConfig {
            kind: BankKind::Chmm3,
            ..self.config.clone()
        };
        Self::from_models(
            config,
            self.labels.clone(),
            self.fingerprint.clone(),
            models,
        )
    }

    fn check_input(&self, obs: &Observation, fingerprint: &str) -> Result<()> {
        if fingerprint != self.fingerprint {
            return Err(Error::IncompatibleFeatures {
                expected: self.fingerprint.clone(),
                actual: fingerprint.to_string(),
            });
        }
        if obs.features.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: obs.features.dim(),
            });
        }
        Ok(())
    }

    /// Scores `obs` under every label's model and picks the best.
    pub fn classify(&self, obs: &Observation, fingerprint: &str) -> Result<Classification> {
        self.check_input(obs, fingerprint)?;
        let scores = self
            .models
            .iter()
            .map(|m| m.score(obs, self.config.alpha))
            .collect::<Result<Vec<_>>>()?;
        Ok(Classification {
            label: argmax_label(&scores),
            scores,
        })
    }

    /// Acoustic and suprasegmental components per label, so several α values
    /// can be evaluated from one pass. CSPHMM3 banks only.
    pub fn score_components(
        &self,
        obs: &Observation,
        fingerprint: &str,
    ) -> Result<Vec<FusedScore>> {
        self.check_input(obs, fingerprint)?;
        let prosody = require_prosody(obs)?;
        self.models
            .iter()
            .map(|m| match m {
                EmotionModel::Csphmm3(c) => c.score(&obs.features, prosody),
                _ => Err(Error::arg("score components exist for CSPHMM3 banks only")),
            })
            .collect()
    }

    pub fn manifest(&self) -> BankManifest {
        BankManifest {
            format: BANK_FORMAT.into(),
            version: 1,
            kind: self.config.kind,
            labels: self.labels.clone(),
            fingerprint: self.fingerprint.clone(),
            alpha: self.config.alpha,
            config: self.config.clone(),
            models: self
                .labels
                .labels()
                .iter()
                .map(|l| ModelEntry {
                    label: l.to_string(),
                    file: format!("{l}.json"),
                })
                .collect(),
        }
    }

    /// Writes `manifest.json` and one `<label>.json` per emotion.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let manifest = self.manifest();
        for (entry, model) in manifest.models.iter().zip(&self.models) {
            let path = dir.join(&entry.file);
            fs::write(&path, model.to_json()? + "\n").map_err(|e| Error::io(&path, e))?;
        }
        let path = dir.join(MANIFEST);
        fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")
            .map_err(|e| Error::io(&path, e))?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: BankManifest = serde_json::from_str(&text)?;
        if manifest.format != BANK_FORMAT || manifest.version != 1 {
            return Err(Error::Format {
                what: "bank manifest",
                reason: format!(
                    "unsupported format {} v{}",
                    manifest.format, manifest.version
                ),
            });
        }
        if manifest.kind != manifest.config.kind || manifest.alpha != manifest.config.alpha {
            return Err(Error::Format {
                what: "bank manifest",
                reason: "kind or alpha disagrees with the recorded config".into(),
            });
        }
        let mut models = Vec::with_capacity(manifest.labels.len());
        for label in manifest.labels.labels() {
            let entry = manifest
                .models
                .iter()
                .find(|e| e.label == label.as_str())
                .ok_or_else(|| {
                    Error::IncompleteBank(format!("manifest lists no model for {label}"))
                })?;
            if entry.file.contains(['/', '\\']) {
                return Err(Error::Format {
                    what: "bank manifest",
                    reason: format!("model file {:?} must be a plain file name", entry.file),
                });
            }
            let path = dir.join(&entry.file);
            let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            models.push(EmotionModel::from_json(manifest.kind, &text)?);
        }
        Self::from_models(
            manifest.config,
            manifest.labels,
            manifest.fingerprint,
            models,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_prefers_first_on_ties() {
        assert_eq!(argmax_label(&[1.0, 3.0, 3.0]), 1);
        assert_eq!(argmax_label(&[-1.0, -1.0]), 0);
        assert_eq!(argmax_label(&[f64::NAN, -5.0]), 1);
        assert_eq!(argmax_label(&[f64::NEG_INFINITY, f64::NEG_INFINITY]), 0);
    }

    #[test]
    fn argmax_is_shift_invariant() {
        let s = [-10.5, -3.25, -7.0, -3.5];
        let shifted: Vec<f64> = s.iter().map(|v| v + 1e3).collect();
        assert_eq!(argmax_label(&s), argmax_label(&shifted));
    }
}
