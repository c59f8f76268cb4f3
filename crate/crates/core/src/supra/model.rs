use serde::{Deserialize, Serialize};

use super::layout::{segment_by_alignment, SuprasegmentalLayout};
use crate::error::{Error, Result};
use crate::features::{
    summarize_segments, utterance_prosody, FeatureSequence, ProsodySegmentVector, ProsodyTrack,
};
use crate::hmm::{forward_log_likelihood, viterbi_align, HmmDocument, HmmModel};
use crate::numeric::{column_moments, diag_gaussian_log_pdf, normalize_with_floor};

pub const CSPHMM3_FORMAT: &str = "suprahmm/csphmm3";
const DIM: usize = ProsodySegmentVector::DIM;

/// Single diagonal Gaussian over prosody vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagGaussian {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

impl DiagGaussian {
    fn fit(rows: &[[f64; DIM]], floor: &[f64]) -> Self {
        let (mean, var, _) = column_moments(rows.iter().map(|r| r.as_slice()), DIM);
        let variance = var.iter().zip(floor).map(|(v, f)| v.max(*f)).collect();
        Self { mean, variance }
    }

    fn validate(&self) -> Result<()> {
        if self.mean.len() != DIM || self.variance.len() != DIM {
            return Err(Error::DimensionMismatch {
                expected: DIM,
                actual: self.mean.len().min(self.variance.len()),
            });
        }
        if self.mean.iter().any(|m| !m.is_finite())
            || self.variance.iter().any(|v| !(v.is_finite() && *v > 0.0))
        {
            return Err(Error::Numeric("invalid prosody Gaussian".into()));
        }
        Ok(())
    }

    pub fn log_pdf(&self, x: &ProsodySegmentVector) -> f64 {
        diag_gaussian_log_pdf(&x.to_array(), &self.mean, &self.variance)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SupraOptions {
    pub transition_floor: f64,
    /// Per-dimension variance floor as a fraction of the global segment variance.
    pub variance_floor_ratio: f64,
    /// Absolute lower bound on any variance.
    pub min_variance: f64,
}

impl Default for SupraOptions {
    fn default() -> Self {
        Self {
            transition_floor: 1e-6,
            variance_floor_ratio: 1e-4,
            min_variance: 1e-6,
        }
    }
}

/// Prosody observations of one training utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct SupraTrainingExample {
    /// `(suprasegmental state, segment vector)` in time order.
    pub segments: Vec<(usize, ProsodySegmentVector)>,
    pub utterance: ProsodySegmentVector,
}

impl SupraTrainingExample {
    /// Aligns `features` with the acoustic model and summarises `track` over
    /// the resulting suprasegmental segments.
    pub fn from_alignment(
        acoustic: &HmmModel,
        layout: &SuprasegmentalLayout,
        features: &FeatureSequence,
        track: &ProsodyTrack,
    ) -> Result<Self> {
        let (path, _) = viterbi_align(acoustic, features)?;
        Self::from_path(&path, layout, track)
    }

    pub fn from_path(
        path: &[usize],
        layout: &SuprasegmentalLayout,
        track: &ProsodyTrack,
    ) -> Result<Self> {
        let seg = segment_by_alignment(path, layout)?;
        let vectors = summarize_segments(track, &seg.frame_segments)?;
        Ok(Self {
            segments: seg.segment_states.into_iter().zip(vectors).collect(),
            utterance: utterance_prosody(track),
        })
    }
}

/// Prosodic model: per-state segment Gaussians, bigram weights between
/// suprasegmental states and a top-level utterance Gaussian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuprasegmentalModel {
    pub states: Vec<DiagGaussian>,
    /// Row-stochastic `S × S` matrix, `transitions[from][to]`.
    pub transitions: Vec<Vec<f64>>,
    pub top: DiagGaussian,
    /// Floor applied to every variance during training.
    pub variance_floor: Vec<f64>,
}

impl SuprasegmentalModel {
    pub fn num_supra(&self) -> usize {
        self.states.len()
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.states.len();
        if s == 0 || self.transitions.len() != s {
            return Err(Error::config("suprasegmental model shape is inconsistent"));
        }
        for g in self.states.iter().chain(std::iter::once(&self.top)) {
            g.validate()?;
        }
        for row in &self.transitions {
            if row.len() != s || row.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                return Err(Error::config("invalid suprasegmental transition row"));
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::Numeric(format!("transition row sums to {total}")));
            }
        }
        Ok(())
    }
}

pub fn train_suprasegmental(
    corpus: &[SupraTrainingExample],
    layout: &SuprasegmentalLayout,
    opts: &SupraOptions,
) -> Result<SuprasegmentalModel> {
    if corpus.is_empty() {
        return Err(Error::EmptyInput("suprasegmental training corpus"));
    }
    let s = layout.num_supra();
    let mut per_state: Vec<Vec<[f64; DIM]>> = vec![Vec::new(); s];
    let mut counts = vec![vec![0.0; s]; s];
    for ex in corpus {
        if ex.segments.is_empty() {
            return Err(Error::EmptyInput("utterance with no segments"));
        }
        for (i, (p, v)) in ex.segments.iter().enumerate() {
            if *p >= s {
                return Err(Error::StateOutOfRange {
                    state: *p,
                    num_states: s,
                });
            }
            per_state[*p].push(v.to_array());
            if i > 0 {
                counts[ex.segments[i - 1].0][*p] += 1.0;
            }
        }
    }

    let all: Vec<[f64; DIM]> = per_state.iter().flatten().copied().collect();
    let (_, global_var, _) = column_moments(all.iter().map(|r| r.as_slice()), DIM);
    let floor: Vec<f64> = global_var
        .iter()
        .map(|v| (opts.variance_floor_ratio * v).max(opts.min_variance))
        .collect();
    let global = DiagGaussian::fit(&all, &floor);

    let states = per_state
        .iter()
        .enumerate()
        .map(|(p, rows)| {
            if rows.is_empty() {
                log::warn!(
                    "suprasegmental state {p} has no segments; using global prosody statistics"
                );
                global.clone()
            } else {
                DiagGaussian::fit(rows, &floor)
            }
        })
        .collect();
    for row in &mut counts {
        normalize_with_floor(row, opts.transition_floor);
    }
    let utterances: Vec<[f64; DIM]> = corpus.iter().map(|ex| ex.utterance.to_array()).collect();
    let model = SuprasegmentalModel {
        states,
        transitions: counts,
        top: DiagGaussian::fit(&utterances, &floor),
        variance_floor: floor,
    };
    model.validate()?;
    Ok(model)
}

/// Segment densities + transition log-weights + top-level utterance density.
pub fn suprasegmental_log_likelihood(
    model: &SuprasegmentalModel,
    segments: &[(usize, ProsodySegmentVector)],
    utterance: &ProsodySegmentVector,
) -> Result<f64> {
    if segments.is_empty() {
        return Err(Error::EmptyInput("segments"));
    }
    let s = model.num_supra();
    let mut total = model.top.log_pdf(utterance);
    for (i, (p, v)) in segments.iter().enumerate() {
        if *p >= s {
            return Err(Error::StateOutOfRange {
                state: *p,
                num_states: s,
            });
        }
        total += model.states[*p].log_pdf(v);
        if i > 0 {
            total += model.transitions[segments[i - 1].0][*p].ln();
        }
    }
    Ok(total)
}

/// `(1 − α)·acoustic + α·supra`, returning the component exactly at the
/// endpoints so an infinite component cannot leak in through `0·∞`.
pub fn fuse(alpha: f64, acoustic: f64, supra: f64) -> f64 {
    if alpha == 0.0 {
        acoustic
    } else if alpha == 1.0 {
        supra
    } else {
        (1.0 - alpha) * acoustic + alpha * supra
    }
}

/// Component scores of one utterance under one model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusedScore {
    pub acoustic: f64,
    pub supra: f64,
}

impl FusedScore {
    pub fn fused(&self, alpha: f64) -> f64 {
        fuse(alpha, self.acoustic, self.supra)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Csphmm3Model {
    acoustic: HmmModel,
    supra: SuprasegmentalModel,
    layout: SuprasegmentalLayout,
    alpha: f64,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::config(format!("alpha {alpha} outside [0, 1]")));
    }
    Ok(())
}

impl Csphmm3Model {
    pub fn new(
        acoustic: HmmModel,
        supra: SuprasegmentalModel,
        layout: SuprasegmentalLayout,
        alpha: f64,
    ) -> Result<Self> {
        check_alpha(alpha)?;
        supra.validate()?;
        if layout.num_states() != acoustic.num_states() {
            return Err(Error::DimensionMismatch {
                expected: acoustic.num_states(),
                actual: layout.num_states(),
            });
        }
        if layout.num_supra() != supra.num_supra() {
            return Err(Error::DimensionMismatch {
                expected: supra.num_supra(),
                actual: layout.num_supra(),
            });
        }
        Ok(Self {
            acoustic,
            supra,
            layout,
            alpha,
        })
    }

    /// Fits the prosody layer on top of an already trained acoustic model.
    pub fn train(
        acoustic: HmmModel,
        layout: SuprasegmentalLayout,
        corpus: &[(&FeatureSequence, &ProsodyTrack)],
        alpha: f64,
        opts: &SupraOptions,
    ) -> Result<Self> {
        check_alpha(alpha)?;
        let examples = corpus
            .iter()
            .map(|(f, p)| SupraTrainingExample::from_alignment(&acoustic, &layout, f, p))
            .collect::<Result<Vec<_>>>()?;
        let supra = train_suprasegmental(&examples, &layout, opts)?;
        Self::new(acoustic, supra, layout, alpha)
    }

    pub fn acoustic(&self) -> &HmmModel {
        &self.acoustic
    }

    pub fn supra(&self) -> &SuprasegmentalModel {
        &self.supra
    }

    pub fn layout(&self) -> &SuprasegmentalLayout {
        &self.layout
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn with_alpha(mut self, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        self.alpha = alpha;
        Ok(self)
    }

    /// Acoustic forward score and suprasegmental score over the acoustic
    /// Viterbi segmentation.
    pub fn score(&self, features: &FeatureSequence, track: &ProsodyTrack) -> Result<FusedScore> {
        let acoustic = forward_log_likelihood(&self.acoustic, features)?;
        let ex =
            SupraTrainingExample::from_alignment(&self.acoustic, &self.layout, features, track)?;
        let supra = suprasegmental_log_likelihood(&self.supra, &ex.segments, &ex.utterance)?;
        Ok(FusedScore { acoustic, supra })
    }

    pub fn fused_log_likelihood(
        &self,
        features: &FeatureSequence,
        track: &ProsodyTrack,
    ) -> Result<f64> {
        Ok(self.score(features, track)?.fused(self.alpha))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&Csphmm3Document::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str::<Csphmm3Document>(text)?.try_into()
    }
}

/// Serialized form: acoustic document, prosody layer, layout and α.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Csphmm3Document {
    pub format: String,
    pub version: u32,
    pub alpha: f64,
    pub layout: SuprasegmentalLayout,
    pub acoustic: HmmDocument,
    pub supra: SuprasegmentalModel,
}

impl From<&Csphmm3Model> for Csphmm3Document {
    fn from(m: &Csphmm3Model) -> Self {
        Self {
            format: CSPHMM3_FORMAT.into(),
            version: 1,
            alpha: m.alpha,
            layout: m.layout.clone(),
            acoustic: HmmDocument::from(&m.acoustic),
            supra: m.supra.clone(),
        }
    }
}

impl TryFrom<Csphmm3Document> for Csphmm3Model {
    type Error = Error;

    fn try_from(doc: Csphmm3Document) -> Result<Self> {
        if doc.format != CSPHMM3_FORMAT || doc.version != 1 {
            return Err(Error::Format {
                what: "csphmm3 document",
                reason: format!("unsupported format {} v{}", doc.format, doc.version),
            });
        }
        let layout = SuprasegmentalLayout::new(doc.layout.assignment().to_vec())?;
        Self::new(doc.acoustic.try_into()?, doc.supra, layout, doc.alpha)
    }
}
