//! Shared fixtures for the criterion benches.

use suprahmm_core::features::{AudioClip, FeatureSequence};
use suprahmm_core::hmm::{sample_sequence, GaussianMixtureEmission, HmmModel};

/// Default-shaped order-3 model: 6 states, 3 mixtures, 32 dimensions.
pub fn default_model() -> HmmModel {
    let (n, m, d) = (6, 3, 32);
    let mut means = Vec::with_capacity(n * m * d);
    for s in 0..n {
        for mix in 0..m {
            means.extend((0..d).map(|k| ((s * 7 + mix * 3 + k) % 11) as f64 - 5.0));
        }
    }
    let emissions = GaussianMixtureEmission::new(
        n,
        m,
        d,
        vec![1.0 / m as f64; n * m],
        means,
        vec![1.0; n * m * d],
    )
    .expect("valid emissions");
    HmmModel::uniform(3, emissions).expect("valid model")
}

pub fn sampled_utterance(model: &HmmModel, len: usize) -> FeatureSequence {
    sample_sequence(model, len, 7, 10.0).expect("sampling").1
}

/// One second of a 16 kHz harmonic signal.
pub fn voiced_clip() -> AudioClip {
    let samples = (0..16_000)
        .map(|i| {
            let t = i as f64 / 16_000.0;
            0.3 * (2.0 * std::f64::consts::PI * 150.0 * t).sin()
                + 0.1 * (2.0 * std::f64::consts::PI * 450.0 * t).sin()
        })
        .collect();
    AudioClip::new(samples, 16_000).expect("valid clip")
}
