//! Decoding accuracy and switch detection time.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{PosteriorSequence, StateSequence};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    /// One entry per true switch, in seconds.
    pub switch_times_s: Vec<f64>,
    /// Mean of `switch_times_s`; null when there are no true switches.
    pub mean_switch_time_s: Option<f64>,
    pub missed_switches: usize,
    pub n_true_switches: usize,
    pub config: serde_json::Value,
}

impl EvalReport {
    pub fn validate(&self) -> Result<()> {
        if !self.accuracy.is_finite() || !(0.0..=1.0).contains(&self.accuracy) {
            return Err(Error::InvalidParameter(format!(
                "accuracy must be a finite fraction, got {}",
                self.accuracy
            )));
        }
        if self.switch_times_s.iter().any(|t| !t.is_finite() || *t < 0.0)
            || self.mean_switch_time_s.is_some_and(|m| !m.is_finite())
        {
            return Err(Error::InvalidParameter("switch times must be finite and non-negative".into()));
        }
        if self.switch_times_s.len() != self.n_true_switches || self.missed_switches > self.n_true_switches {
            return Err(Error::InvalidParameter("inconsistent switch counts".into()));
        }
        Ok(())
    }
}

/// Fraction of samples where the decoded state matches the truth.
pub fn decoding_accuracy(pred: &StateSequence, truth: &StateSequence) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::Dimension(format!(
            "{} decoded samples against {} true samples",
            pred.len(),
            truth.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::Dimension("empty sequences".into()));
    }
    let hits = pred.states.iter().zip(&truth.states).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / truth.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwitchTimes {
    pub times_s: Vec<f64>,
    pub missed: usize,
}

/// Upward crossings of 0.5 in the posterior of `state`: `p[tau] > 0.5` and
/// `p[tau - 1] <= 0.5`, held above 0.5 for `min_hold` samples.
fn crossings(rows: &[[f64; 2]], state: usize, min_hold: usize) -> Vec<usize> {
    (1..rows.len())
        .filter(|&tau| rows[tau][state] > 0.5 && rows[tau - 1][state] <= 0.5)
        .filter(|&tau| {
            let end = tau + min_hold.max(1);
            end <= rows.len() && rows[tau..end].iter().all(|r| r[state] > 0.5)
        })
        .collect()
}

/// Absolute time from each true switch to the nearest upward 0.5 crossing of
/// the newly attended state's posterior, searched over the whole recording
/// in both directions. A switch whose nearest crossing is further away than
/// the gap to its neighbouring true switch (the smaller of the two gaps; the
/// only gap at either end) is missed and scored as that gap.
///
/// Uses smoothed posteriors when present.
pub fn switch_detection_times(
    posteriors: &PosteriorSequence,
    truth: &StateSequence,
    fs_hz: f64,
    min_hold_samples: usize,
) -> Result<SwitchTimes> {
    let rows = posteriors.best();
    if rows.len() != truth.len() {
        return Err(Error::Dimension(format!(
            "{} posterior rows against {} true samples",
            rows.len(),
            truth.len()
        )));
    }
    let switches = truth.switch_indices();
    let ups = [crossings(rows, 0, min_hold_samples), crossings(rows, 1, min_hold_samples)];
    let mut times_s = Vec::with_capacity(switches.len());
    let mut missed = 0;
    for (k, &t) in switches.iter().enumerate() {
        let target = truth.states[t].index();
        // nearest crossing; an earlier one wins an exact tie
        let nearest = ups[target].iter().map(|&tau| tau.abs_diff(t)).min();
        let prev_gap = (k > 0).then(|| t - switches[k - 1]);
        let next_gap = switches.get(k + 1).map(|&n| n - t);
        let interval = match (prev_gap, next_gap) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        match (nearest, interval) {
            (Some(d), Some(gap)) if d > gap => {
                times_s.push(gap as f64 / fs_hz);
                missed += 1;
            }
            (None, Some(gap)) => {
                times_s.push(gap as f64 / fs_hz);
                missed += 1;
            }
            (Some(d), _) => times_s.push(d as f64 / fs_hz),
            // a lone switch with no crossing: the whole recording is the only interval
            (None, None) => {
                times_s.push(truth.len() as f64 / fs_hz);
                missed += 1;
            }
        }
    }
    Ok(SwitchTimes { times_s, missed })
}

/// Swaps the posterior columns when that strictly improves accuracy of the
/// decoded sequence. Returns the (possibly swapped) posteriors and whether a
/// swap happened.
pub fn align_labels(posteriors: &PosteriorSequence, truth: &StateSequence) -> Result<(PosteriorSequence, bool)> {
    let decoded = crate::msm::decode(posteriors, posteriors.smoothed.is_some(), truth.fs_hz)?;
    let straight = decoding_accuracy(&decoded, truth)?;
    let swapped = posteriors.swapped();
    let decoded_swapped = crate::msm::decode(&swapped, swapped.smoothed.is_some(), truth.fs_hz)?;
    let flipped = decoding_accuracy(&decoded_swapped, truth)?;
    if flipped > straight {
        Ok((swapped, true))
    } else {
        Ok((posteriors.clone(), false))
    }
}

/// Accuracy of the decoded sequence plus switch detection on the posteriors.
pub fn evaluate(
    posteriors: &PosteriorSequence,
    decoded: &StateSequence,
    truth: &StateSequence,
    fs_hz: f64,
    min_hold_samples: usize,
    config: serde_json::Value,
) -> Result<EvalReport> {
    let accuracy = decoding_accuracy(decoded, truth)?;
    let switches = switch_detection_times(posteriors, truth, fs_hz, min_hold_samples)?;
    let n = switches.times_s.len();
    let mean = (n > 0).then(|| switches.times_s.iter().sum::<f64>() / n as f64);
    let report = EvalReport {
        accuracy,
        switch_times_s: switches.times_s,
        mean_switch_time_s: mean,
        missed_switches: switches.missed,
        n_true_switches: n,
        config,
    };
    report.validate()?;
    Ok(report)
}
