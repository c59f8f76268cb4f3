use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::UtteranceRecord;
use crate::error::{Error, Result};

/// Disjoint speaker and text sets for training and testing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_speakers: BTreeSet<String>,
    pub test_speakers: BTreeSet<String>,
    pub train_texts: BTreeSet<String>,
    pub test_texts: BTreeSet<String>,
}

/// Indices into the record list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        if let Some(s) = self.train_speakers.intersection(&self.test_speakers).next() {
            return Err(Error::config(format!(
                "speaker {s} is in both train and test sets"
            )));
        }
        if let Some(t) = self.train_texts.intersection(&self.test_texts).next() {
            return Err(Error::config(format!(
                "text {t} is in both train and test sets"
            )));
        }
        Ok(())
    }

    /// First `n_speakers` speakers and first `n_texts` texts (in sorted order)
    /// train; the rest test.
    pub fn leading(records: &[UtteranceRecord], n_speakers: usize, n_texts: usize) -> Self {
        let speakers: BTreeSet<String> = records.iter().map(|r| r.speaker.clone()).collect();
        let texts: BTreeSet<String> = records.iter().map(|r| r.text.clone()).collect();
        let (train_speakers, test_speakers) = partition(speakers, n_speakers);
        let (train_texts, test_texts) = partition(texts, n_texts);
        Self {
            train_speakers,
            test_speakers,
            train_texts,
            test_texts,
        }
    }

    pub fn describe(&self) -> String {
        format!(
            "speakers {}/{} (train {}; test {}), texts {}/{}",
            self.train_speakers.len(),
            self.test_speakers.len(),
            join(&self.train_speakers),
            join(&self.test_speakers),
            self.train_texts.len(),
            self.test_texts.len(),
        )
    }
}

fn partition(all: BTreeSet<String>, n: usize) -> (BTreeSet<String>, BTreeSet<String>) {
    let mut it = all.into_iter();
    let first = it.by_ref().take(n).collect();
    (first, it.collect())
}

fn join(set: &BTreeSet<String>) -> String {
    set.iter().cloned().collect::<Vec<_>>().join(",")
}

/// Train = train speakers and train texts; test = test speakers and test
/// texts. Records matching neither are dropped.
pub fn make_split(records: &[UtteranceRecord], spec: &SplitSpec) -> Result<Split> {
    spec.validate()?;
    let mut split = Split {
        train: Vec::new(),
        test: Vec::new(),
    };
    for (i, r) in records.iter().enumerate() {
        if spec.train_speakers.contains(&r.speaker) && spec.train_texts.contains(&r.text) {
            split.train.push(i);
        } else if spec.test_speakers.contains(&r.speaker) && spec.test_texts.contains(&r.text) {
            split.test.push(i);
        }
    }
    if split.test.is_empty() {
        log::warn!("split leaves the test set empty");
    }
    Ok(split)
}
