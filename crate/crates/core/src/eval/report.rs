use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::{argmax_label, BankKind, LabelSet, ModelBank, Observation};
use crate::error::{Error, Result};
use crate::supra::FusedScore;

/// Counts and column-normalised percentages, indexed `[predicted][true]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub labels: LabelSet,
    pub counts: Vec<Vec<u64>>,
    /// Each true-label column sums to 100 when it has any utterances.
    pub percentages: Vec<Vec<f64>>,
}

impl ConfusionMatrix {
    /// Tallies `(true, predicted)` label index pairs.
    pub fn from_pairs(labels: &LabelSet, pairs: &[(usize, usize)]) -> Result<Self> {
        let n = labels.len();
        let mut counts = vec![vec![0u64; n]; n];
        for &(truth, pred) in pairs {
            if truth >= n || pred >= n {
                return Err(Error::arg(format!(
                    "label pair ({truth}, {pred}) outside the label set"
                )));
            }
            counts[pred][truth] += 1;
        }
        Ok(Self::from_counts(labels.clone(), counts))
    }

    pub fn from_counts(labels: LabelSet, counts: Vec<Vec<u64>>) -> Self {
        let n = labels.len();
        let mut percentages = vec![vec![0.0; n]; n];
        for t in 0..n {
            let total: u64 = (0..n).map(|p| counts[p][t]).sum();
            if total > 0 {
                for p in 0..n {
                    percentages[p][t] = 100.0 * counts[p][t] as f64 / total as f64;
                }
            }
        }
        Self {
            labels,
            counts,
            percentages,
        }
    }

    pub fn column_total(&self, truth: usize) -> u64 {
        self.counts.iter().map(|row| row[truth]).sum()
    }

    pub fn column_percentage_sum(&self, truth: usize) -> f64 {
        self.percentages.iter().map(|row| row[truth]).sum()
    }

    /// Diagonal percentage, `None` for labels with no test utterances.
    pub fn accuracy(&self, label: usize) -> Option<f64> {
        (self.column_total(label) > 0).then(|| self.percentages[label][label])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmotionAccuracy {
    pub label: String,
    pub accuracy: Option<f64>,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub index: usize,
    pub truth: String,
    pub predicted: String,
    pub scores: Vec<f64>,
}

/// Provenance carried by every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub bank_kind: BankKind,
    /// Fusion weight; recorded for CSPHMM3 banks only.
    pub alpha: Option<f64>,
    pub seeds: Vec<u64>,
    pub split: String,
    pub fingerprint: String,
    pub tool_version: String,
    /// Free-form configuration echo supplied by the caller.
    #[serde(default)]
    pub config: serde_json::Value,
}

impl ReportMeta {
    pub fn for_bank(bank: &ModelBank, split: impl Into<String>) -> Self {
        Self {
            bank_kind: bank.kind(),
            alpha: (bank.kind() == BankKind::Csphmm3).then(|| bank.alpha()),
            seeds: vec![bank.config().seed],
            split: split.into(),
            fingerprint: bank.fingerprint().to_string(),
            tool_version: crate::VERSION.to_string(),
            config: serde_json::Value::Null,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub meta: ReportMeta,
    pub per_emotion: Vec<EmotionAccuracy>,
    /// Unweighted mean of the per-emotion accuracies that are defined.
    pub average_accuracy: f64,
    pub confusion: ConfusionMatrix,
    pub predictions: Vec<Prediction>,
}

impl EvaluationReport {
    /// Builds a report from `(true, predicted, scores)` per test utterance.
    pub fn from_predictions(
        meta: ReportMeta,
        labels: &LabelSet,
        results: Vec<(usize, usize, Vec<f64>)>,
    ) -> Result<Self> {
        if results.is_empty() {
            return Err(Error::EmptyInput("test set"));
        }
        let pairs: Vec<(usize, usize)> = results.iter().map(|(t, p, _)| (*t, *p)).collect();
        let confusion = ConfusionMatrix::from_pairs(labels, &pairs)?;
        let per_emotion: Vec<EmotionAccuracy> = (0..labels.len())
            .map(|l| EmotionAccuracy {
                label: labels.get(l).to_string(),
                accuracy: confusion.accuracy(l),
                count: confusion.column_total(l),
            })
            .collect();
        let defined: Vec<f64> = per_emotion.iter().filter_map(|e| e.accuracy).collect();
        let average_accuracy = defined.iter().sum::<f64>() / defined.len() as f64;
        let predictions = results
            .into_iter()
            .enumerate()
            .map(|(index, (t, p, scores))| Prediction {
                index,
                truth: labels.get(t).to_string(),
                predicted: labels.get(p).to_string(),
                scores,
            })
            .collect();
        Ok(Self {
            meta,
            per_emotion,
            average_accuracy,
            confusion,
            predictions,
        })
    }

    pub fn accuracies(&self) -> Vec<f64> {
        self.per_emotion.iter().filter_map(|e| e.accuracy).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Per-emotion accuracy row followed by the confusion matrix, rows
    /// predicted and columns true.
    pub fn to_text(&self) -> String {
        let labels = self.confusion.labels.labels();
        let width = labels
            .iter()
            .map(|l| l.as_str().len())
            .max()
            .unwrap_or(0)
            .max(9)
            + 2;
        let model = match self.meta.alpha {
            Some(a) => format!("{} (alpha = {a})", self.meta.bank_kind),
            None => self.meta.bank_kind.to_string(),
        };
        let mut out = String::new();
        let _ = writeln!(out, "Emotion recognition accuracy (%) for {model}");
        let _ = writeln!(out, "split: {}", self.meta.split);
        let _ = write!(out, "{:<w$}", "model", w = width);
        for l in labels {
            let _ = write!(out, "{:>w$}", l.as_str(), w = width);
        }
        let _ = writeln!(out, "{:>w$}", "average", w = width);
        let _ = write!(out, "{:<w$}", self.meta.bank_kind.name(), w = width);
        for e in &self.per_emotion {
            match e.accuracy {
                Some(a) => {
                    let _ = write!(out, "{:>w$.1}", a, w = width);
                }
                None => {
                    let _ = write!(out, "{:>w$}", "-", w = width);
                }
            }
        }
        let _ = writeln!(out, "{:>w$.1}", self.average_accuracy, w = width);
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "Confusion (%): rows = assessed emotion, columns = test emotion"
        );
        let _ = write!(out, "{:<w$}", "", w = width);
        for l in labels {
            let _ = write!(out, "{:>w$}", l.as_str(), w = width);
        }
        let _ = writeln!(out);
        for (p, l) in labels.iter().enumerate() {
            let _ = write!(out, "{:<w$}", l.as_str(), w = width);
            for t in 0..labels.len() {
                let _ = write!(out, "{:>w$.1}", self.confusion.percentages[p][t], w = width);
            }
            let _ = writeln!(out);
        }
        out
    }
}

/// Classifies every test utterance and tallies the results.
pub fn evaluate_split(
    bank: &ModelBank,
    test: &[(usize, &Observation)],
    fingerprint: &str,
    meta: ReportMeta,
) -> Result<EvaluationReport> {
    let results = test
        .par_iter()
        .map(|(truth, obs)| {
            let c = bank.classify(obs, fingerprint)?;
            Ok((*truth, c.label, c.scores))
        })
        .collect::<Result<Vec<_>>>()?;
    EvaluationReport::from_predictions(meta, bank.labels(), results)
}

/// One report per α from a single pass of component scoring. CSPHMM3 only.
pub fn evaluate_alpha_sweep(
    bank: &ModelBank,
    test: &[(usize, &Observation)],
    fingerprint: &str,
    alphas: &[f64],
    meta: ReportMeta,
) -> Result<Vec<EvaluationReport>> {
    if let Some(a) = alphas.iter().find(|a| !(0.0..=1.0).contains(*a)) {
        return Err(Error::config(format!("alpha {a} outside [0, 1]")));
    }
    let components: Vec<(usize, Vec<FusedScore>)> = test
        .par_iter()
        .map(|(truth, obs)| Ok((*truth, bank.score_components(obs, fingerprint)?)))
        .collect::<Result<_>>()?;
    alphas
        .iter()
        .map(|&alpha| {
            let results = components
                .iter()
                .map(|(truth, parts)| {
                    let scores: Vec<f64> = parts.iter().map(|s| s.fused(alpha)).collect();
                    (*truth, argmax_label(&scores), scores)
                })
                .collect();
            let meta = ReportMeta {
                alpha: Some(alpha),
                ..meta.clone()
            };
            EvaluationReport::from_predictions(meta, bank.labels(), results)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta() -> ReportMeta {
        ReportMeta {
            bank_kind: BankKind::Chmm3,
            alpha: None,
            seeds: vec![1],
            split: "fixture".into(),
            fingerprint: "fp".into(),
            tool_version: "0".into(),
            config: serde_json::Value::Null,
        }
    }

    #[test]
    fn perfect_classifier_is_identity() {
        let labels = LabelSet::default();
        let pairs: Vec<(usize, usize)> = (0..12).map(|i| (i % 6, i % 6)).collect();
        let m = ConfusionMatrix::from_pairs(&labels, &pairs).unwrap();
        for p in 0..6 {
            for t in 0..6 {
                assert_eq!(m.percentages[p][t], if p == t { 100.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn constant_predictor_fills_row_zero() {
        let labels = LabelSet::default();
        let pairs: Vec<(usize, usize)> = (0..12).map(|i| (i % 6, 0)).collect();
        let m = ConfusionMatrix::from_pairs(&labels, &pairs).unwrap();
        for t in 0..6 {
            assert_eq!(m.percentages[0][t], 100.0);
        }
    }

    #[test]
    fn hand_tally_of_ten() {
        let labels = LabelSet::from_names(&["a", "b", "c"]).unwrap();
        // (true, predicted)
        let pairs = [
            (0, 0),
            (0, 0),
            (0, 1),
            (0, 2),
            (1, 1),
            (1, 1),
            (1, 1),
            (2, 0),
            (2, 2),
            (2, 2),
        ];
        let results = pairs.iter().map(|&(t, p)| (t, p, vec![0.0; 3])).collect();
        let r = EvaluationReport::from_predictions(meta(), &labels, results).unwrap();
        let c = &r.confusion;
        assert_eq!(c.counts, vec![vec![2, 0, 1], vec![1, 3, 0], vec![1, 0, 2]]);
        assert_eq!(c.percentages[0][0], 50.0);
        assert_eq!(c.percentages[1][1], 100.0);
        assert!((c.percentages[2][2] - 200.0 / 3.0).abs() < 1e-12);
        for t in 0..3 {
            assert!((c.column_percentage_sum(t) - 100.0).abs() < 1e-9);
        }
        assert!((r.average_accuracy - (50.0 + 100.0 + 200.0 / 3.0) / 3.0).abs() < 1e-12);
        let text = r.to_text();
        assert!(text.contains("average") && text.contains("66.7"));
        let back = EvaluationReport::from_json(&r.to_json().unwrap()).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn empty_columns_are_undefined() {
        let labels = LabelSet::from_names(&["a", "b"]).unwrap();
        let r = EvaluationReport::from_predictions(meta(), &labels, vec![(0, 0, vec![])]).unwrap();
        assert_eq!(r.per_emotion[1].accuracy, None);
        assert_eq!(r.average_accuracy, 100.0);
        assert!(EvaluationReport::from_predictions(meta(), &labels, vec![]).is_err());
    }
}
