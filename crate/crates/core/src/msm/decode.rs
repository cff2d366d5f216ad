use super::emission::EmissionLogLik;
use crate::error::{Error, Result};
use crate::types::{PosteriorSequence, State, StateSequence};

const TIE: f64 = 1e-15;

fn argmax_with_hysteresis<'a>(rows: impl Iterator<Item = [f64; 2]> + 'a) -> Vec<State> {
    let mut out: Vec<State> = Vec::new();
    for r in rows {
        let state = if (r[0] - r[1]).abs() < TIE {
            out.last().copied().unwrap_or(State::One)
        } else if r[0] > r[1] {
            State::One
        } else {
            State::Two
        };
        out.push(state);
    }
    out
}

/// Per-sample argmax of the requested posteriors. Exact ties keep the
/// previous sample's state; a tie at the first sample decodes as state 1.
pub fn decode(posteriors: &PosteriorSequence, use_smoothed: bool, fs_hz: f64) -> Result<StateSequence> {
    let rows = if use_smoothed {
        posteriors
            .smoothed
            .as_ref()
            .ok_or_else(|| Error::InvalidParameter("smoothed posteriors were not computed".into()))?
    } else {
        &posteriors.filtered
    };
    StateSequence::new(argmax_with_hysteresis(rows.iter().copied()), fs_hz)
}

/// Maximum-likelihood state per sample from the emissions alone, without any
/// temporal model.
pub fn per_sample_map(emissions: &EmissionLogLik, fs_hz: f64) -> Result<StateSequence> {
    StateSequence::new(argmax_with_hysteresis(emissions.loglik.iter().copied()), fs_hz)
}
