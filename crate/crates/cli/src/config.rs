use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};
use suprahmm_core::classify::{BankConfig, LabelSet, DEFAULT_EMOTIONS};
use suprahmm_core::corpus::{SplitSpec, SyntheticSpec, UtteranceRecord};
use suprahmm_core::{Error, MfccConfig};

pub const SEED_ENV: &str = "SUPRAHMM_SEED";

/// Explicit speaker/text sets, or the leading `n` of each in sorted order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitConfig {
    pub num_train_speakers: usize,
    pub num_train_texts: usize,
    pub train_speakers: Option<BTreeSet<String>>,
    pub test_speakers: Option<BTreeSet<String>>,
    pub train_texts: Option<BTreeSet<String>>,
    pub test_texts: Option<BTreeSet<String>>,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            num_train_speakers: 5,
            num_train_texts: 10,
            train_speakers: None,
            test_speakers: None,
            train_texts: None,
            test_texts: None,
        }
    }
}

impl SplitConfig {
    pub fn resolve(&self, records: &[UtteranceRecord]) -> SplitSpec {
        let leading = SplitSpec::leading(records, self.num_train_speakers, self.num_train_texts);
        let pick = |explicit: &Option<BTreeSet<String>>, fallback: BTreeSet<String>| {
            explicit.clone().unwrap_or(fallback)
        };
        SplitSpec {
            train_speakers: pick(&self.train_speakers, leading.train_speakers),
            test_speakers: pick(&self.test_speakers, leading.test_speakers),
            train_texts: pick(&self.train_texts, leading.train_texts),
            test_texts: pick(&self.test_texts, leading.test_texts),
        }
    }
}

/// Single source of truth for an experiment; CLI flags override its keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub features: MfccConfig,
    pub labels: Vec<String>,
    pub bank: BankConfig,
    pub split: SplitConfig,
    pub synthetic: SyntheticSpec,
    /// Fusion weights evaluated by `evaluate` in addition to `bank.alpha`.
    pub alpha_sweep: Vec<f64>,
    /// Overrides `bank.seed` and `synthetic.seed` when set.
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            features: MfccConfig::default(),
            labels: DEFAULT_EMOTIONS.iter().map(|s| s.to_string()).collect(),
            bank: BankConfig::default(),
            split: SplitConfig::default(),
            synthetic: SyntheticSpec::default(),
            alpha_sweep: Vec::new(),
            seed: None,
            output_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::Io {
                    path: p.to_path_buf(),
                    source: e,
                })?;
                serde_json::from_str(&text)
                    .map_err(|e| Error::InvalidConfig(format!("{}: {e}", p.display())))?
            }
            None => Self::default(),
        };
        if let Ok(v) = std::env::var(SEED_ENV) {
            let seed = v.trim().parse().map_err(|_| {
                Error::InvalidConfig(format!("{SEED_ENV}={v:?} is not an unsigned integer"))
            })?;
            cfg.seed = Some(seed);
        }
        Ok(cfg)
    }

    /// Applies the master seed and checks every section.
    pub fn finalize(mut self) -> anyhow::Result<Self> {
        if let Some(seed) = self.seed {
            self.bank.seed = seed;
            self.synthetic.seed = seed;
        }
        self.features.validate()?;
        self.bank.validate()?;
        self.synthetic.validate()?;
        self.label_set()?;
        if let Some(a) = self.alpha_sweep.iter().find(|a| !(0.0..=1.0).contains(*a)) {
            return Err(
                Error::InvalidConfig(format!("alpha_sweep value {a} outside [0, 1]")).into(),
            );
        }
        Ok(self)
    }

    pub fn label_set(&self) -> anyhow::Result<LabelSet> {
        LabelSet::from_names(&self.labels).context("labels")
    }

    pub fn output_dir(&self, flag: Option<PathBuf>) -> anyhow::Result<PathBuf> {
        flag.or_else(|| self.output_dir.clone()).ok_or_else(|| {
            Error::InvalidConfig("no output directory given (--out or output_dir)".into()).into()
        })
    }
}
