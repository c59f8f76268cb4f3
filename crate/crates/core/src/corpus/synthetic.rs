use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{SplitSpec, UtteranceRecord};
use crate::classify::{EmotionLabel, LabelSet, Observation, DEFAULT_EMOTIONS};
use crate::error::{Error, Result};
use crate::features::{FeatureSequence, ProsodyTrack};
use crate::hmm::{
    sample_with_rng, CircularTopology, GaussianMixtureEmission, HmmModel, TransitionTensor,
};
use crate::numeric::fnv1a64;
use crate::supra::SuprasegmentalLayout;

pub const SYNTHETIC_FINGERPRINT_PREFIX: &str = "synthetic";
const FRAME_SHIFT_MS: f64 = 10.0;

/// Per-frame prosody generator. Offsets are drawn per emotion and per
/// suprasegmental state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProsodyGenSpec {
    /// Mean `ln F0` of voiced frames.
    pub f0_base: f64,
    pub f0_separation: f64,
    pub f0_noise: f64,
    pub energy_base: f64,
    pub energy_separation: f64,
    pub energy_noise: f64,
    pub voicing_base: f64,
    pub voicing_separation: f64,
    /// SD of per-speaker `ln F0` and energy offsets.
    pub speaker_scale: f64,
}

impl Default for ProsodyGenSpec {
    fn default() -> Self {
        Self {
            f0_base: 5.0,
            f0_separation: 0.08,
            f0_noise: 0.05,
            energy_base: -4.0,
            energy_separation: 0.4,
            energy_noise: 0.3,
            voicing_base: 0.75,
            voicing_separation: 0.05,
            speaker_scale: 0.02,
        }
    }
}

/// Recipe for a synthetic labelled corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub num_emotions: usize,
    pub num_speakers: usize,
    pub num_train_speakers: usize,
    pub num_texts: usize,
    pub num_train_texts: usize,
    pub replicates: u32,
    pub min_frames: usize,
    pub max_frames: usize,
    pub dim: usize,
    pub num_states: usize,
    pub self_loop: f64,
    /// Each third-order context's self-loop is `self_loop ± jitter`.
    pub self_loop_jitter: f64,
    /// SD of the state means shared by all emotions.
    pub state_spread: f64,
    /// SD of the per-emotion offsets to those means.
    pub acoustic_separation: f64,
    pub emission_sd: f64,
    /// SD of the per-speaker offset added to every frame.
    pub speaker_scale: f64,
    /// `(target, source)` pairs: emotion `target` reuses `source`'s generators.
    pub clone_emotions: Vec<(usize, usize)>,
    pub prosody: ProsodyGenSpec,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            num_emotions: 6,
            num_speakers: 8,
            num_train_speakers: 5,
            num_texts: 20,
            num_train_texts: 10,
            replicates: 2,
            min_frames: 80,
            max_frames: 150,
            dim: 32,
            num_states: 6,
            self_loop: 0.85,
            self_loop_jitter: 0.05,
            state_spread: 2.0,
            acoustic_separation: 1.0,
            emission_sd: 1.0,
            speaker_scale: 0.3,
            clone_emotions: Vec::new(),
            prosody: ProsodyGenSpec::default(),
            seed: 7,
        }
    }
}

impl SyntheticSpec {
    /// Emotions that differ mainly in prosody: weak acoustic offsets, strong
    /// prosodic ones.
    pub fn prosody_informative() -> Self {
        Self {
            acoustic_separation: 0.05,
            prosody: ProsodyGenSpec {
                f0_separation: 0.15,
                energy_separation: 1.0,
                voicing_separation: 0.1,
                ..ProsodyGenSpec::default()
            },
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            self.num_emotions,
            self.num_speakers,
            self.num_texts,
            self.replicates as usize,
            self.min_frames,
            self.dim,
            self.num_states,
        ];
        if counts.contains(&0) {
            return Err(Error::config(
                "synthetic spec counts must all be at least 1",
            ));
        }
        if self.num_train_speakers > self.num_speakers || self.num_train_texts > self.num_texts {
            return Err(Error::config("more training speakers or texts than exist"));
        }
        if self.min_frames > self.max_frames {
            return Err(Error::config("min_frames exceeds max_frames"));
        }
        if !(self.self_loop > 0.0 && self.self_loop < 1.0) || !(self.self_loop_jitter >= 0.0) {
            return Err(Error::config(
                "self_loop must lie in (0, 1) and jitter be non-negative",
            ));
        }
        let p = &self.prosody;
        let scales = [
            self.state_spread,
            self.acoustic_separation,
            self.speaker_scale,
            p.f0_separation,
            p.f0_noise,
            p.energy_separation,
            p.energy_noise,
            p.voicing_separation,
            p.speaker_scale,
        ];
        if scales.iter().any(|s| !(s.is_finite() && *s >= 0.0)) || !(self.emission_sd > 0.0) {
            return Err(Error::config(
                "synthetic scales must be finite and non-negative",
            ));
        }
        if !(0.0..=1.0).contains(&p.voicing_base) {
            return Err(Error::config("voicing_base must lie in [0, 1]"));
        }
        if let Some((t, s)) = self
            .clone_emotions
            .iter()
            .find(|(t, s)| *t >= self.num_emotions || *s >= self.num_emotions)
        {
            return Err(Error::config(format!(
                "clone pair ({t}, {s}) outside the emotion range"
            )));
        }
        Ok(())
    }

    pub fn labels(&self) -> LabelSet {
        let names: Vec<String> = (0..self.num_emotions)
            .map(|i| match DEFAULT_EMOTIONS.get(i) {
                Some(n) => n.to_string(),
                None => format!("emotion{}", i + 1),
            })
            .collect();
        LabelSet::from_names(&names).expect("generated names are valid")
    }

    pub fn fingerprint(&self) -> String {
        format!("{SYNTHETIC_FINGERPRINT_PREFIX}:dim={}", self.dim)
    }

    fn speaker(&self, i: usize) -> String {
        format!("spk{:02}", i + 1)
    }

    fn text(&self, i: usize) -> String {
        format!("txt{:02}", i + 1)
    }
}

/// Prosody parameters of one emotion, per suprasegmental state.
#[derive(Debug, Clone, PartialEq)]
struct ProsodyParams {
    f0: Vec<f64>,
    energy: Vec<f64>,
    voicing: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub spec: SyntheticSpec,
    pub labels: LabelSet,
    pub records: Vec<UtteranceRecord>,
    pub label_indices: Vec<usize>,
    pub observations: Vec<Observation>,
    /// Generating state path of each utterance.
    pub states: Vec<Vec<usize>>,
    /// Acoustic generator of each emotion.
    pub generators: Vec<HmmModel>,
}

impl SyntheticCorpus {
    pub fn fingerprint(&self) -> String {
        self.spec.fingerprint()
    }

    /// Split on the spec's leading speakers and texts.
    pub fn default_split(&self) -> SplitSpec {
        SplitSpec::leading(
            &self.records,
            self.spec.num_train_speakers,
            self.spec.num_train_texts,
        )
    }

    pub fn labelled(&self, indices: &[usize]) -> Vec<(usize, &Observation)> {
        indices
            .iter()
            .map(|&i| (self.label_indices[i], &self.observations[i]))
            .collect()
    }
}

fn normal<R: Rng>(rng: &mut R, sd: f64) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    sd * z
}

fn generator(spec: &SyntheticSpec, base: &[Vec<f64>], rng: &mut ChaCha8Rng) -> Result<HmmModel> {
    let n = spec.num_states;
    let topo = CircularTopology::new(n)?;
    let means: Vec<Vec<f64>> = base
        .iter()
        .map(|m| {
            m.iter()
                .map(|v| v + normal(rng, spec.acoustic_separation))
                .collect()
        })
        .collect();
    let var = vec![spec.emission_sd * spec.emission_sd; spec.dim];
    let emissions = GaussianMixtureEmission::from_state_means(&means, &var)?;
    let mut tensors = Vec::new();
    for order in 1..=3 {
        let template = TransitionTensor::uniform(topo, order)?;
        let probs: Vec<f64> = if topo.branching() == 1 {
            vec![1.0; template.num_contexts()]
        } else {
            (0..template.num_contexts())
                .flat_map(|_| {
                    let jitter = spec.self_loop_jitter * rng.random_range(-1.0..=1.0);
                    let stay = (spec.self_loop + jitter).clamp(0.05, 0.99);
                    [stay, 1.0 - stay]
                })
                .collect()
        };
        tensors.push(TransitionTensor::from_rows(topo, order, probs)?);
    }
    let mut initial = vec![if n > 1 { 0.1 / (n - 1) as f64 } else { 0.0 }; n];
    initial[0] = if n > 1 { 0.9 } else { 1.0 };
    HmmModel::new(initial, tensors, emissions)
}

fn prosody_params(spec: &SyntheticSpec, num_supra: usize, rng: &mut ChaCha8Rng) -> ProsodyParams {
    let p = &spec.prosody;
    ProsodyParams {
        f0: (0..num_supra)
            .map(|_| normal(rng, p.f0_separation))
            .collect(),
        energy: (0..num_supra)
            .map(|_| normal(rng, p.energy_separation))
            .collect(),
        voicing: (0..num_supra)
            .map(|_| (p.voicing_base + normal(rng, p.voicing_separation)).clamp(0.05, 0.99))
            .collect(),
    }
}

struct SpeakerParams {
    acoustic: Vec<f64>,
    f0: f64,
    energy: f64,
}

fn speaker_params(spec: &SyntheticSpec, name: &str) -> SpeakerParams {
    let mut rng =
        ChaCha8Rng::seed_from_u64(spec.seed ^ fnv1a64(format!("speaker|{name}").as_bytes()));
    SpeakerParams {
        acoustic: (0..spec.dim)
            .map(|_| normal(&mut rng, spec.speaker_scale))
            .collect(),
        f0: normal(&mut rng, spec.prosody.speaker_scale),
        energy: normal(&mut rng, spec.prosody.speaker_scale),
    }
}

/// Generates every `(emotion, speaker, text, replicate)` utterance. Each
/// utterance draws from its own stream seeded with `seed ^ hash(key)`, so the
/// corpus is bit-identical for a given spec.
pub fn synthesize_corpus(spec: &SyntheticSpec) -> Result<SyntheticCorpus> {
    spec.validate()?;
    let labels = spec.labels();
    let layout = SuprasegmentalLayout::halves(spec.num_states)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let base: Vec<Vec<f64>> = (0..spec.num_states)
        .map(|_| {
            (0..spec.dim)
                .map(|_| normal(&mut rng, spec.state_spread))
                .collect()
        })
        .collect();
    let mut generators = Vec::with_capacity(spec.num_emotions);
    let mut prosody = Vec::with_capacity(spec.num_emotions);
    for _ in 0..spec.num_emotions {
        generators.push(generator(spec, &base, &mut rng)?);
        prosody.push(prosody_params(spec, layout.num_supra(), &mut rng));
    }
    for &(target, source) in &spec.clone_emotions {
        generators[target] = generators[source].clone();
        prosody[target] = prosody[source].clone();
    }
    let speakers: Vec<SpeakerParams> = (0..spec.num_speakers)
        .map(|s| speaker_params(spec, &spec.speaker(s)))
        .collect();

    let mut jobs = Vec::new();
    for (e, label) in labels.labels().iter().enumerate() {
        for s in 0..spec.num_speakers {
            for t in 0..spec.num_texts {
                for rep in 0..spec.replicates {
                    let record = UtteranceRecord {
                        id: format!("{label}-{}-{}-r{rep}", spec.speaker(s), spec.text(t)),
                        path: None,
                        speaker: spec.speaker(s),
                        emotion: EmotionLabel::clone(label),
                        text: spec.text(t),
                        replicate: rep,
                    };
                    jobs.push((e, s, record));
                }
            }
        }
    }

    let generated = jobs
        .par_iter()
        .map(|(e, s, record)| {
            let mut rng =
                ChaCha8Rng::seed_from_u64(spec.seed ^ fnv1a64(record.key_string().as_bytes()));
            let len = rng.random_range(spec.min_frames..=spec.max_frames);
            let (states, raw) = sample_with_rng(&generators[*e], len, &mut rng, FRAME_SHIFT_MS)?;
            let spk = &speakers[*s];
            let data: Vec<f64> = raw
                .frames()
                .flat_map(|f| f.iter().zip(&spk.acoustic).map(|(x, o)| x + o))
                .collect();
            let features = FeatureSequence::from_flat(data, spec.dim, FRAME_SHIFT_MS)?;
            let track = prosody_track(spec, &prosody[*e], spk, &layout, &states, &mut rng)?;
            Ok((Observation::new(features, Some(track))?, states))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut corpus = SyntheticCorpus {
        spec: spec.clone(),
        labels,
        records: Vec::with_capacity(jobs.len()),
        label_indices: Vec::with_capacity(jobs.len()),
        observations: Vec::with_capacity(jobs.len()),
        states: Vec::with_capacity(jobs.len()),
        generators,
    };
    for ((e, _, record), (obs, states)) in jobs.into_iter().zip(generated) {
        corpus.records.push(record);
        corpus.label_indices.push(e);
        corpus.observations.push(obs);
        corpus.states.push(states);
    }
    Ok(corpus)
}

fn prosody_track(
    spec: &SyntheticSpec,
    params: &ProsodyParams,
    speaker: &SpeakerParams,
    layout: &SuprasegmentalLayout,
    states: &[usize],
    rng: &mut ChaCha8Rng,
) -> Result<ProsodyTrack> {
    let p = &spec.prosody;
    let mut log_f0 = Vec::with_capacity(states.len());
    let mut voiced = Vec::with_capacity(states.len());
    let mut energy = Vec::with_capacity(states.len());
    for &q in states {
        let sp = layout.supra_of(q);
        let v = rng.random::<f64>() < params.voicing[sp];
        let f0 = p.f0_base + params.f0[sp] + speaker.f0 + normal(rng, p.f0_noise);
        log_f0.push(if v { f0 } else { 0.0 });
        voiced.push(v);
        energy
            .push(p.energy_base + params.energy[sp] + speaker.energy + normal(rng, p.energy_noise));
    }
    ProsodyTrack::new(log_f0, voiced, energy)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SyntheticSpec {
        SyntheticSpec {
            num_speakers: 2,
            num_train_speakers: 1,
            num_texts: 2,
            num_train_texts: 1,
            replicates: 1,
            min_frames: 20,
            max_frames: 30,
            dim: 4,
            ..SyntheticSpec::default()
        }
    }

    #[test]
    fn deterministic_and_shaped() {
        let spec = small();
        let a = synthesize_corpus(&spec).unwrap();
        let b = synthesize_corpus(&spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.records.len(), 6 * 2 * 2);
        for (obs, states) in a.observations.iter().zip(&a.states) {
            assert_eq!(obs.features.dim(), 4);
            assert_eq!(obs.features.num_frames(), states.len());
            assert!((20..=30).contains(&states.len()));
            assert_eq!(obs.prosody.as_ref().unwrap().len(), states.len());
        }
    }

    #[test]
    fn seed_changes_corpus() {
        let a = synthesize_corpus(&small()).unwrap();
        let b = synthesize_corpus(&SyntheticSpec { seed: 8, ..small() }).unwrap();
        assert_ne!(a.observations, b.observations);
    }

    #[test]
    fn clones_share_generators() {
        let spec = SyntheticSpec {
            clone_emotions: vec![(1, 0)],
            ..small()
        };
        let c = synthesize_corpus(&spec).unwrap();
        assert_eq!(c.generators[0], c.generators[1]);
        assert_ne!(c.generators[0], c.generators[2]);
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(synthesize_corpus(&SyntheticSpec {
            num_emotions: 0,
            ..small()
        })
        .is_err());
        assert!(synthesize_corpus(&SyntheticSpec {
            min_frames: 40,
            ..small()
        })
        .is_err());
        assert!(synthesize_corpus(&SyntheticSpec {
            clone_emotions: vec![(9, 0)],
            ..small()
        })
        .is_err());
    }

    #[test]
    fn label_names_extend_past_default() {
        let spec = SyntheticSpec {
            num_emotions: 8,
            ..small()
        };
        let l = spec.labels();
        assert_eq!(l.get(6).as_str(), "emotion7");
    }
}
