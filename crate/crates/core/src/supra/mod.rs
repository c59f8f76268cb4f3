//! Suprasegmental prosody layer built on top of an acoustic CHMM3, and the
//! log-linear fusion `(1 − α)·acoustic + α·suprasegmental`.
//!
//! Conventional states are grouped into suprasegmental states (by default
//! q1..q3 → p1 and q4..q6 → p2). A hard Viterbi alignment of the acoustic
//! model cuts an utterance into maximal runs of one suprasegmental state;
//! each run is summarised by a [`ProsodySegmentVector`]. Per-state Gaussians
//! score those vectors, bigram weights score the order of runs, and a
//! top-level Gaussian scores the whole-utterance prosody vector.

mod layout;
mod model;

pub use layout::{segment_by_alignment, Segmentation, SuprasegmentalLayout};
pub use model::{
    fuse, suprasegmental_log_likelihood, train_suprasegmental, Csphmm3Document, Csphmm3Model,
    DiagGaussian, FusedScore, SupraOptions, SupraTrainingExample, SuprasegmentalModel,
    CSPHMM3_FORMAT,
};
