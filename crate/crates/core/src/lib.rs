//! Third-order circular suprasegmental hidden Markov models for speech
//! emotion recognition.
//!
//! The crate is organised bottom-up:
//!
//! * [`features`]: MFCC + delta front-end, per-frame prosody tracks and the
//!   on-disk feature dump format.
//! * [`hmm`]: order 1..3 circular HMMs with diagonal Gaussian-mixture
//!   emissions. Inference runs on a first-order composite lattice.
//! * [`supra`]: the suprasegmental prosody layer and the log-linear fusion of
//!   acoustic and prosodic scores.
//! * [`classify`]: per-emotion model banks (CSPHMM3, CHMM3, GMM, VQ) and the
//!   argmax recognizer.
//! * [`eval`]: confusion matrices, accuracy reports and the pooled-SD
//!   Student's t test.
//! * [`corpus`]: manifests, speaker/text independent splits and the
//!   synthetic corpus generator.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classify;
pub mod cluster;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod features;
pub mod hmm;
pub mod numeric;
pub mod supra;

pub use classify::{BankKind, EmotionLabel, LabelSet, ModelBank, Observation};
pub use corpus::{SplitSpec, SyntheticSpec, UtteranceRecord};
pub use error::{Error, Result};
pub use eval::{ConfusionMatrix, EvaluationReport, SignificanceResult};
pub use features::{AudioClip, FeatureSequence, MfccConfig, ProsodySegmentVector, ProsodyTrack};
pub use hmm::{CircularTopology, GaussianMixtureEmission, HmmModel, TransitionTensor};
pub use supra::{Csphmm3Model, SuprasegmentalLayout, SuprasegmentalModel};

/// Tool version recorded in provenance blocks.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
