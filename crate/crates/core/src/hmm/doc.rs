//! Versioned JSON document for [`HmmModel`].
//!
//! Transition tensors list only legal contexts, keyed by their state tuple,
//! with one probability per legal successor. Floats are written with the
//! shortest representation that round-trips, so save/load is lossless.

use serde::{Deserialize, Serialize};

use super::{CircularTopology, GaussianMixtureEmission, HmmModel, TransitionTensor};
use crate::error::{Error, Result};

pub const HMM_FORMAT: &str = "suprahmm/circular-hmm";
pub const HMM_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HmmDocument {
    pub format: String,
    pub version: u32,
    pub order: usize,
    pub num_states: usize,
    pub num_mixtures: usize,
    pub dim: usize,
    pub initial: Vec<f64>,
    /// Orders 1..=order; the last is the main tensor, earlier ones boot tensors.
    pub tensors: Vec<TensorDocument>,
    pub emissions: Vec<StateEmissionDocument>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TensorDocument {
    pub order: usize,
    pub rows: Vec<TensorRow>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TensorRow {
    pub context: Vec<usize>,
    /// `(next_state, probability)` over the legal successors.
    pub next: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StateEmissionDocument {
    pub state: usize,
    pub components: Vec<ComponentDocument>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComponentDocument {
    pub weight: f64,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

impl From<&HmmModel> for HmmDocument {
    fn from(model: &HmmModel) -> Self {
        let topo = model.topology();
        let e = model.emissions();
        let tensors = model
            .tensors()
            .iter()
            .map(|t| TensorDocument {
                order: t.order(),
                rows: (0..t.num_contexts())
                    .map(|idx| {
                        let context = t.context_states(idx);
                        let last = *context.last().unwrap();
                        let next = t
                            .row(idx)
                            .iter()
                            .enumerate()
                            .map(|(mv, &p)| (topo.successor(last, mv), p))
                            .collect();
                        TensorRow { context, next }
                    })
                    .collect(),
            })
            .collect();
        let emissions = (0..e.num_states())
            .map(|s| StateEmissionDocument {
                state: s,
                components: (0..e.num_mixtures())
                    .map(|m| ComponentDocument {
                        weight: e.weights(s)[m],
                        mean: e.mean(s, m).to_vec(),
                        variance: e.variance(s, m).to_vec(),
                    })
                    .collect(),
            })
            .collect();
        Self {
            format: HMM_FORMAT.to_string(),
            version: HMM_FORMAT_VERSION,
            order: model.order(),
            num_states: model.num_states(),
            num_mixtures: e.num_mixtures(),
            dim: e.dim(),
            initial: model.initial().to_vec(),
            tensors,
            emissions,
        }
    }
}

fn malformed(reason: impl Into<String>) -> Error {
    Error::Format {
        what: "HMM document",
        reason: reason.into(),
    }
}

impl TryFrom<HmmDocument> for HmmModel {
    type Error = Error;

    fn try_from(doc: HmmDocument) -> Result<Self> {
        if doc.format != HMM_FORMAT {
            return Err(malformed(format!("unexpected format tag '{}'", doc.format)));
        }
        if doc.version != HMM_FORMAT_VERSION {
            return Err(malformed(format!("unsupported version {}", doc.version)));
        }
        if doc.tensors.len() != doc.order {
            return Err(malformed("tensor count does not match order"));
        }
        let topo = CircularTopology::new(doc.num_states)?;
        let mut tensors = Vec::with_capacity(doc.order);
        for (k, td) in doc.tensors.iter().enumerate() {
            if td.order != k + 1 {
                return Err(malformed(format!("tensor {k} has order {}", td.order)));
            }
            let mut t = TransitionTensor::uniform(topo, td.order)?;
            if td.rows.len() != t.num_contexts() {
                return Err(malformed(format!(
                    "order-{} tensor lists {} contexts, expected {}",
                    td.order,
                    td.rows.len(),
                    t.num_contexts()
                )));
            }
            for row in &td.rows {
                let idx = t
                    .context_index(&row.context)
                    .ok_or_else(|| malformed(format!("illegal context {:?}", row.context)))?;
                let last = *row.context.last().unwrap();
                if row.next.len() != topo.branching() {
                    return Err(malformed("wrong successor count"));
                }
                for &(next, p) in &row.next {
                    let mv = topo
                        .move_between(last, next)
                        .ok_or_else(|| malformed(format!("illegal successor {next}")))?;
                    t.row_mut(idx)[mv] = p;
                }
            }
            tensors.push(TransitionTensor::from_rows(
                topo,
                td.order,
                t.as_flat().to_vec(),
            )?);
        }

        if doc.emissions.len() != doc.num_states {
            return Err(malformed("emission state count mismatch"));
        }
        let nm = doc.num_states * doc.num_mixtures;
        let mut weights = Vec::with_capacity(nm);
        let mut means = Vec::with_capacity(nm * doc.dim);
        let mut variances = Vec::with_capacity(nm * doc.dim);
        for (s, se) in doc.emissions.iter().enumerate() {
            if se.state != s || se.components.len() != doc.num_mixtures {
                return Err(malformed(format!("emission block {s} malformed")));
            }
            for c in &se.components {
                if c.mean.len() != doc.dim || c.variance.len() != doc.dim {
                    return Err(malformed("component dimension mismatch"));
                }
                weights.push(c.weight);
                means.extend_from_slice(&c.mean);
                variances.extend_from_slice(&c.variance);
            }
        }
        let emissions = GaussianMixtureEmission::new(
            doc.num_states,
            doc.num_mixtures,
            doc.dim,
            weights,
            means,
            variances,
        )?;
        HmmModel::new(doc.initial, tensors, emissions)
    }
}

impl HmmModel {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&HmmDocument::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: HmmDocument = serde_json::from_str(text)?;
        doc.try_into()
    }
}
