//! Sample-level selective auditory attention decoding with a two-state
//! Markov switching regression.
//!
//! The envelope difference of two competing speakers is modelled as a linear
//! function of lagged multichannel EEG whose coefficients and noise variance
//! depend on a hidden attention state. The state follows a symmetric
//! two-state Markov chain. Parameters are fitted by EM on the recording
//! itself, starting from a pretrained stimulus-reconstruction decoder, and
//! attention is read off the smoothed (or, causally, filtered) posteriors.
//!
//! Alongside the model the crate carries the window-level baseline
//! (correlation features, a two-component Gaussian mixture and HMM
//! smoothing), a synthetic data generator and the evaluation metrics.

pub mod baseline;
pub mod config;
pub mod embed;
pub mod error;
pub mod eval;
pub mod io;
pub mod msm;
pub mod synth;
pub mod types;

pub use error::{Error, Result};
pub use types::{MsmParams, MultichannelSeries, PosteriorSequence, State, StateSequence, TransitionModel};
