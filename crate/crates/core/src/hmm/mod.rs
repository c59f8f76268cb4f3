//! Circular hidden Markov models of order 1, 2 and 3 with diagonal
//! Gaussian-mixture emissions.
//!
//! Higher-order inference reduces to a first-order chain over legal context
//! tuples ([`CompositeLattice`]); with the self-loop + successor ring there
//! are at most `N · 2^(r-1)` such tuples.

mod doc;
mod emission;
mod inference;
mod lattice;
mod model;
mod sample;
mod tensor;
mod topology;
mod train;

pub use doc::{HmmDocument, HMM_FORMAT, HMM_FORMAT_VERSION};
pub use emission::GaussianMixtureEmission;
pub use inference::{forward_log_likelihood, viterbi_align};
pub use lattice::{CompositeLattice, LatticeArc, LatticeLayer};
pub use model::HmmModel;
pub use sample::{sample_sequence, sample_with_rng};
pub use tensor::TransitionTensor;
pub use topology::CircularTopology;
pub use train::{
    baum_welch_train, initialize_model, train_circular_chain, variance_floor, BaumWelchOptions,
    ChainOutcome, HmmTrainConfig, TrainOutcome, MIN_VARIANCE,
};
