//! Synthetic recordings drawn from the switching-regression generative model,
//! and the segment-swap protocol that multiplies attention switches.
//!
//! Randomness comes from ChaCha20 (`rand_chacha::ChaCha20Rng`) seeded with
//! `seed_from_u64(seed)`. Each random quantity reads from its own ChaCha
//! stream so that changing one part of a spec does not reshuffle the others:
//!
//! | stream | quantity |
//! |--------|----------|
//! | 1 | Markov chain states |
//! | 2 | EEG samples |
//! | 3 | regression noise (standard normal, scaled per state) |
//! | 4 | common envelope component |
//! | 5 | segment swap coin flips |
//! | 6 | random decoder when none is given |

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::embed::LagDirection;
use crate::error::{Error, Result};
use crate::types::{MsmParams, MultichannelSeries, State, StateSequence, TransitionModel};

const STREAM_STATES: u64 = 1;
const STREAM_EEG: u64 = 2;
const STREAM_NOISE: u64 = 3;
const STREAM_COMMON: u64 = 4;
const STREAM_SWAP: u64 = 5;
const STREAM_BETA: u64 = 6;

pub(crate) fn rng_for(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// First-order chain: `S_0 ~ initial`, then stay with probability `p_stay`.
pub fn sample_markov_chain(samples: usize, transition: &TransitionModel, seed: u64, fs_hz: f64) -> Result<StateSequence> {
    if samples == 0 {
        return Err(Error::InvalidParameter("chain length must be at least 1".into()));
    }
    let mut rng = rng_for(seed, STREAM_STATES);
    let mut states = Vec::with_capacity(samples);
    let mut s = if rng.gen::<f64>() < transition.initial[0] {
        State::One
    } else {
        State::Two
    };
    states.push(s);
    for _ in 1..samples {
        if rng.gen::<f64>() >= transition.p_stay {
            s = s.other();
        }
        states.push(s);
    }
    StateSequence::new(states, fs_hz)
}

fn default_fs() -> f64 {
    10.0
}

fn default_p_stay() -> f64 {
    1.0 - 1e-3
}

/// Everything needed to draw a synthetic recording.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    #[serde(alias = "T")]
    pub samples: usize,
    #[serde(alias = "C")]
    pub channels: usize,
    #[serde(alias = "L")]
    pub lag_count: usize,
    #[serde(default)]
    pub direction: LagDirection,
    #[serde(default = "default_fs")]
    pub fs_hz: f64,
    /// When absent, a random unit-norm decoder is drawn from the seed.
    #[serde(default)]
    pub beta1: Option<Vec<f64>>,
    /// When absent, `-beta1`.
    #[serde(default)]
    pub beta2: Option<Vec<f64>>,
    pub sigma2_1: f64,
    pub sigma2_2: f64,
    #[serde(default = "default_p_stay")]
    pub p_stay: f64,
    #[serde(default)]
    pub initial: Option<[f64; 2]>,
    pub seed: u64,
}

impl SynthSpec {
    /// The reference configuration: 6000 samples, 4 channels, 2 lags,
    /// opposite unit-norm decoders, noise variance 0.25, `p_stay = 1 - 1e-3`.
    pub fn reference(seed: u64) -> Self {
        Self {
            samples: 6000,
            channels: 4,
            lag_count: 2,
            direction: LagDirection::Future,
            fs_hz: 10.0,
            beta1: None,
            beta2: None,
            sigma2_1: 0.25,
            sigma2_2: 0.25,
            p_stay: 1.0 - 1e-3,
            initial: None,
            seed,
        }
    }

    pub fn dim(&self) -> usize {
        self.channels * self.lag_count
    }

    /// Resolves the decoders and chain, validating every field.
    pub fn true_params(&self) -> Result<MsmParams> {
        let field = |name: &str, msg: String| Error::InvalidParameter(format!("{name}: {msg}"));
        if self.samples == 0 {
            return Err(field("samples", "must be at least 1".into()));
        }
        if self.channels == 0 {
            return Err(field("channels", "must be at least 1".into()));
        }
        if self.lag_count == 0 || self.lag_count > self.samples {
            return Err(field("lag_count", format!("must lie in [1, {}]", self.samples)));
        }
        if !(self.fs_hz.is_finite() && self.fs_hz > 0.0) {
            return Err(field("fs_hz", format!("must be positive, got {}", self.fs_hz)));
        }
        for (name, v) in [("sigma2_1", self.sigma2_1), ("sigma2_2", self.sigma2_2)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(field(name, format!("must be positive, got {v}")));
            }
        }
        let beta1 = match &self.beta1 {
            Some(b) => b.clone(),
            None => {
                let mut rng = rng_for(self.seed, STREAM_BETA);
                let raw: Vec<f64> = (0..self.dim()).map(|_| rng.sample(StandardNormal)).collect();
                let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
                raw.into_iter().map(|v| v / norm).collect()
            }
        };
        let beta2 = match &self.beta2 {
            Some(b) => b.clone(),
            None => beta1.iter().map(|v| -v).collect(),
        };
        for (name, b) in [("beta1", &beta1), ("beta2", &beta2)] {
            if b.len() != self.dim() {
                return Err(field(
                    name,
                    format!("has {} coefficients, channels * lag_count = {}", b.len(), self.dim()),
                ));
            }
        }
        let transition = TransitionModel::with_initial(self.p_stay, self.initial.unwrap_or([0.5, 0.5]))
            .map_err(|e| field("p_stay/initial", e.to_string()))?;
        MsmParams::new(beta1, beta2, [self.sigma2_1, self.sigma2_2], transition)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticRecording {
    pub eeg: MultichannelSeries,
    pub env1: MultichannelSeries,
    pub env2: MultichannelSeries,
    pub states: StateSequence,
    pub true_params: MsmParams,
    /// Realised regression noise, one value per sample.
    pub noise: Vec<f64>,
    pub seed: u64,
}

/// Draws white unit-variance EEG, a state chain, and envelopes whose
/// difference follows the state's regression on the lagged EEG.
///
/// `env1 = (g + d) / 2`, `env2 = (g - d) / 2` with `d_t = beta_{S_t}' x_t + e_t`
/// and `g` an independent unit-variance common component. Samples whose lag
/// window runs off the recording use only the lags that exist; the lagged
/// design drops those rows anyway.
pub fn generate_synthetic(spec: &SynthSpec) -> Result<SyntheticRecording> {
    let params = spec.true_params()?;
    let (t_len, c_len, l_len) = (spec.samples, spec.channels, spec.lag_count);

    let mut rng = rng_for(spec.seed, STREAM_EEG);
    let eeg_data: Vec<f64> = (0..t_len * c_len).map(|_| rng.sample(StandardNormal)).collect();
    let states = sample_markov_chain(t_len, &params.transition, spec.seed, spec.fs_hz)?;

    let mut noise_rng = rng_for(spec.seed, STREAM_NOISE);
    let mut common_rng = rng_for(spec.seed, STREAM_COMMON);
    let mut env1 = Vec::with_capacity(t_len);
    let mut env2 = Vec::with_capacity(t_len);
    let mut noise = Vec::with_capacity(t_len);
    for t in 0..t_len {
        let s = states.states[t];
        let beta = params.beta(s);
        let mut mean = 0.0;
        for c in 0..c_len {
            for l in 0..l_len {
                let src = match spec.direction {
                    LagDirection::Past => t.checked_sub(l),
                    LagDirection::Future => Some(t + l).filter(|&i| i < t_len),
                };
                if let Some(src) = src {
                    mean += beta[c * l_len + l] * eeg_data[src * c_len + c];
                }
            }
        }
        let z: f64 = noise_rng.sample(StandardNormal);
        let e = z * params.sigma2[s.index()].sqrt();
        let g: f64 = common_rng.sample(StandardNormal);
        let d = mean + e;
        env1.push((g + d) / 2.0);
        env2.push((g - d) / 2.0);
        noise.push(e);
    }
    Ok(SyntheticRecording {
        eeg: MultichannelSeries::new(eeg_data, t_len, c_len, spec.fs_hz, None)?,
        env1: MultichannelSeries::from_column(env1, spec.fs_hz)?,
        env2: MultichannelSeries::from_column(env2, spec.fs_hz)?,
        states,
        true_params: params,
        noise,
        seed: spec.seed,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwappedRecording {
    pub env1: MultichannelSeries,
    pub env2: MultichannelSeries,
    pub states: StateSequence,
    /// Whether each segment was swapped.
    pub swapped: Vec<bool>,
}

fn segment_samples(segment_len_s: f64, fs_hz: f64) -> Result<usize> {
    let n = (segment_len_s * fs_hz).round();
    if !(n >= 1.0 && n.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "segment of {segment_len_s} s at {fs_hz} Hz holds no samples"
        )));
    }
    Ok(n as usize)
}

/// Number of segments (including a trailing partial one) for a recording.
pub fn segment_count(samples: usize, segment_len_s: f64, fs_hz: f64) -> Result<usize> {
    let n = segment_samples(segment_len_s, fs_hz)?;
    Ok(samples.div_ceil(n))
}

/// Segment swap with explicit per-segment decisions.
pub fn segment_swap_with(
    env1: &MultichannelSeries,
    env2: &MultichannelSeries,
    states: &StateSequence,
    segment_len_s: f64,
    swaps: &[bool],
) -> Result<SwappedRecording> {
    let a = env1.single_channel()?;
    let b = env2.single_channel()?;
    if a.len() != b.len() || a.len() != states.len() {
        return Err(Error::Dimension(format!(
            "envelopes of {} and {} samples with {} states",
            a.len(),
            b.len(),
            states.len()
        )));
    }
    let seg = segment_samples(segment_len_s, env1.fs_hz())?;
    let count = a.len().div_ceil(seg);
    if swaps.len() != count {
        return Err(Error::Dimension(format!(
            "{} swap decisions for {count} segments",
            swaps.len()
        )));
    }
    let mut out1 = a.to_vec();
    let mut out2 = b.to_vec();
    let mut out_states = states.states.clone();
    for (k, &swap) in swaps.iter().enumerate() {
        if !swap {
            continue;
        }
        let span = k * seg..((k + 1) * seg).min(a.len());
        for t in span {
            std::mem::swap(&mut out1[t], &mut out2[t]);
            out_states[t] = out_states[t].other();
        }
    }
    Ok(SwappedRecording {
        env1: MultichannelSeries::from_column(out1, env1.fs_hz())?,
        env2: MultichannelSeries::from_column(out2, env2.fs_hz())?,
        states: StateSequence::new(out_states, states.fs_hz)?,
        swapped: swaps.to_vec(),
    })
}

/// Splits the recording into `segment_len_s` segments and swaps speaker
/// assignment (envelopes and state labels) in each with probability 1/2.
pub fn segment_swap(
    env1: &MultichannelSeries,
    env2: &MultichannelSeries,
    states: &StateSequence,
    segment_len_s: f64,
    seed: u64,
) -> Result<SwappedRecording> {
    let count = segment_count(states.len(), segment_len_s, env1.fs_hz())?;
    let mut rng = rng_for(seed, STREAM_SWAP);
    let swaps: Vec<bool> = (0..count).map(|_| rng.gen_bool(0.5)).collect();
    segment_swap_with(env1, env2, states, segment_len_s, &swaps)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn absorbing_and_alternating_chains() {
        let tm = TransitionModel::with_initial(1.0, [1.0, 0.0]).unwrap();
        let s = sample_markov_chain(50, &tm, 3, 10.0).unwrap();
        assert!(s.states.iter().all(|s| *s == State::One));
        let tm = TransitionModel::with_initial(0.0, [1.0, 0.0]).unwrap();
        let s = sample_markov_chain(6, &tm, 3, 10.0).unwrap();
        assert_eq!(s.labels(), vec![1, 2, 1, 2, 1, 2]);
    }

    #[test]
    fn chain_is_seeded() {
        let tm = TransitionModel::new(0.9).unwrap();
        let a = sample_markov_chain(100, &tm, 5, 10.0).unwrap();
        let b = sample_markov_chain(100, &tm, 5, 10.0).unwrap();
        let c = sample_markov_chain(100, &tm, 6, 10.0).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn difference_follows_regression() {
        let mut spec = SynthSpec::reference(2);
        spec.samples = 300;
        let rec = generate_synthetic(&spec).unwrap();
        let design = crate::embed::lag_embed(&rec.eeg, spec.lag_count, spec.direction).unwrap();
        let y = crate::embed::difference_observation(&rec.env1, &rec.env2, &design).unwrap();
        for k in 0..design.rows() {
            let t = k + design.t_offset();
            let beta = rec.true_params.beta(rec.states.states[t]);
            let mean: f64 = (0..design.cols()).map(|c| design.get(k, c) * beta[c]).sum();
            assert!((y[k] - (mean + rec.noise[t])).abs() < 1e-12);
        }
    }

    #[test]
    fn spec_errors_name_fields() {
        let mut spec = SynthSpec::reference(0);
        spec.beta1 = Some(vec![1.0; 3]);
        let err = generate_synthetic(&spec).unwrap_err().to_string();
        assert!(err.contains("beta1"), "{err}");
        let mut spec = SynthSpec::reference(0);
        spec.sigma2_2 = -1.0;
        assert!(generate_synthetic(&spec).unwrap_err().to_string().contains("sigma2_2"));
        let mut spec = SynthSpec::reference(0);
        spec.p_stay = 2.0;
        assert!(generate_synthetic(&spec).unwrap_err().to_string().contains("p_stay"));
    }

    #[test]
    fn swap_all_and_none() {
        let env1 = MultichannelSeries::from_column(vec![1., 2., 3., 4., 5.], 1.0).unwrap();
        let env2 = MultichannelSeries::from_column(vec![0.; 5], 1.0).unwrap();
        let states = StateSequence::from_labels(&[1, 1, 2, 2, 1], 1.0).unwrap();
        let none = segment_swap_with(&env1, &env2, &states, 2.0, &[false; 3]).unwrap();
        assert_eq!(none.env1, env1);
        assert_eq!(none.states, states);
        let all = segment_swap_with(&env1, &env2, &states, 2.0, &[true; 3]).unwrap();
        assert_eq!(all.env1, env2);
        assert_eq!(all.env2, env1);
        assert_eq!(all.states.labels(), vec![2, 2, 1, 1, 2]);
        assert!(segment_swap_with(&env1, &env2, &states, 2.0, &[true; 2]).is_err());
        assert!(segment_swap(&env1, &env2, &states, 0.1, 0).is_err());
    }
}
