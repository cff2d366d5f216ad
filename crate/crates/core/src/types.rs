//! Domain data model shared by every stage of the pipeline.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Time-major real-valued recording: `rows` samples by `cols` channels.
#[derive(Debug, Clone, PartialEq)]
pub struct MultichannelSeries {
    data: Vec<f64>,
    rows: usize,
    cols: usize,
    fs_hz: f64,
    labels: Option<Vec<String>>,
}

impl MultichannelSeries {
    /// Builds a series from row-major `data`, rejecting empty shapes and non-finite entries.
    pub fn new(
        data: Vec<f64>,
        rows: usize,
        cols: usize,
        fs_hz: f64,
        labels: Option<Vec<String>>,
    ) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Dimension(format!(
                "series must have at least one sample and one channel, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} values cannot fill a {rows}x{cols} series",
                data.len()
            )));
        }
        if !(fs_hz.is_finite() && fs_hz > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sampling rate must be positive, got {fs_hz}"
            )));
        }
        if let Some(labels) = &labels {
            if labels.len() != cols {
                return Err(Error::Dimension(format!(
                    "{} labels for {cols} channels",
                    labels.len()
                )));
            }
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / cols,
                col: pos % cols,
            });
        }
        Ok(Self {
            data,
            rows,
            cols,
            fs_hz,
            labels,
        })
    }

    /// Single-channel series from a vector of samples.
    pub fn from_column(values: Vec<f64>, fs_hz: f64) -> Result<Self> {
        let rows = values.len();
        Self::new(values, rows, 1, fs_hz, None)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn fs_hz(&self) -> f64 {
        self.fs_hz
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// Row-major backing storage.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, t: usize, c: usize) -> f64 {
        self.data[t * self.cols + c]
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.cols..(t + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|t| self.get(t, c)).collect()
    }

    /// Channel names, falling back to `ch0`, `ch1`, ... when none were given.
    pub fn channel_names(&self) -> Vec<String> {
        match &self.labels {
            Some(l) => l.clone(),
            None => (0..self.cols).map(|c| format!("ch{c}")).collect(),
        }
    }

    /// Returns the samples of a single-channel series.
    pub fn single_channel(&self) -> Result<&[f64]> {
        if self.cols != 1 {
            return Err(Error::Dimension(format!(
                "expected a single-channel series, got {} channels",
                self.cols
            )));
        }
        Ok(&self.data)
    }
}

/// Attention state: which of the two speakers is attended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum State {
    One,
    Two,
}

impl State {
    /// Zero-based column index used in probability matrices.
    pub fn index(self) -> usize {
        match self {
            State::One => 0,
            State::Two => 1,
        }
    }

    pub fn from_index(i: usize) -> Self {
        if i == 0 {
            State::One
        } else {
            State::Two
        }
    }

    /// The label as written in files: 1 or 2.
    pub fn label(self) -> u8 {
        self.index() as u8 + 1
    }

    pub fn from_label(label: i64) -> Result<Self> {
        match label {
            1 => Ok(State::One),
            2 => Ok(State::Two),
            other => Err(Error::InvalidParameter(format!(
                "state labels must be 1 or 2, got {other}"
            ))),
        }
    }

    pub fn other(self) -> Self {
        match self {
            State::One => State::Two,
            State::Two => State::One,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateSequence {
    pub states: Vec<State>,
    pub fs_hz: f64,
}

impl StateSequence {
    pub fn new(states: Vec<State>, fs_hz: f64) -> Result<Self> {
        if !(fs_hz.is_finite() && fs_hz > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sampling rate must be positive, got {fs_hz}"
            )));
        }
        Ok(Self { states, fs_hz })
    }

    pub fn from_labels(labels: &[i64], fs_hz: f64) -> Result<Self> {
        let states = labels
            .iter()
            .map(|&l| State::from_label(l))
            .collect::<Result<Vec<_>>>()?;
        Self::new(states, fs_hz)
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn labels(&self) -> Vec<u8> {
        self.states.iter().map(|s| s.label()).collect()
    }

    /// Sub-sequence `[start, start + len)`.
    pub fn slice(&self, start: usize, len: usize) -> Result<Self> {
        if start + len > self.states.len() {
            return Err(Error::Dimension(format!(
                "slice [{start}, {}) exceeds sequence of length {}",
                start + len,
                self.states.len()
            )));
        }
        Ok(Self {
            states: self.states[start..start + len].to_vec(),
            fs_hz: self.fs_hz,
        })
    }

    /// Indices `t` with `states[t] != states[t - 1]`.
    pub fn switch_indices(&self) -> Vec<usize> {
        (1..self.states.len())
            .filter(|&t| self.states[t] != self.states[t - 1])
            .collect()
    }
}

/// Symmetric two-state Markov chain with shared self-transition probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionModel {
    pub p_stay: f64,
    pub initial: [f64; 2],
}

impl TransitionModel {
    /// Symmetric chain with a uniform initial distribution.
    pub fn new(p_stay: f64) -> Result<Self> {
        Self::with_initial(p_stay, [0.5, 0.5])
    }

    pub fn with_initial(p_stay: f64, initial: [f64; 2]) -> Result<Self> {
        if !(0.0..=1.0).contains(&p_stay) {
            return Err(Error::InvalidParameter(format!(
                "p_stay must lie in [0, 1], got {p_stay}"
            )));
        }
        if initial.iter().any(|p| !(p.is_finite() && *p >= 0.0))
            || (initial[0] + initial[1] - 1.0).abs() > 1e-12
        {
            return Err(Error::InvalidParameter(format!(
                "initial distribution {initial:?} is not a probability vector"
            )));
        }
        Ok(Self { p_stay, initial })
    }

    pub fn p_switch(&self) -> f64 {
        1.0 - self.p_stay
    }

    /// `m[i][j] = Pr(S_t = j | S_{t-1} = i)`.
    pub fn matrix(&self) -> [[f64; 2]; 2] {
        let q = self.p_switch();
        [[self.p_stay, q], [q, self.p_stay]]
    }
}

/// Parameters of the two-state switching regression plus its fixed Markov chain.
#[derive(Debug, Clone, PartialEq)]
pub struct MsmParams {
    pub beta1: Vec<f64>,
    pub beta2: Vec<f64>,
    pub sigma2: [f64; 2],
    pub transition: TransitionModel,
}

impl MsmParams {
    pub fn new(
        beta1: Vec<f64>,
        beta2: Vec<f64>,
        sigma2: [f64; 2],
        transition: TransitionModel,
    ) -> Result<Self> {
        let params = Self {
            beta1,
            beta2,
            sigma2,
            transition,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if self.beta1.len() != self.beta2.len() {
            return Err(Error::Dimension(format!(
                "beta1 has {} coefficients, beta2 has {}",
                self.beta1.len(),
                self.beta2.len()
            )));
        }
        if self.beta1.iter().chain(&self.beta2).any(|b| !b.is_finite()) {
            return Err(Error::InvalidParameter(
                "regression coefficients must be finite".into(),
            ));
        }
        for (i, s) in self.sigma2.iter().enumerate() {
            if !(s.is_finite() && *s > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "noise variance of state {} must be positive, got {s}",
                    i + 1
                )));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.beta1.len()
    }

    pub fn beta(&self, state: State) -> &[f64] {
        match state {
            State::One => &self.beta1,
            State::Two => &self.beta2,
        }
    }

    /// Exchanges the roles of the two states.
    pub fn swapped(&self) -> Self {
        Self {
            beta1: self.beta2.clone(),
            beta2: self.beta1.clone(),
            sigma2: [self.sigma2[1], self.sigma2[0]],
            transition: TransitionModel {
                p_stay: self.transition.p_stay,
                initial: [self.transition.initial[1], self.transition.initial[0]],
            },
        }
    }
}

/// Per-sample two-state posteriors. Column 0 is state 1.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSequence {
    pub filtered: Vec<[f64; 2]>,
    pub smoothed: Option<Vec<[f64; 2]>>,
    pub loglik: f64,
}

impl PosteriorSequence {
    pub fn len(&self) -> usize {
        self.filtered.len()
    }

    pub fn is_empty(&self) -> bool {
        self.filtered.is_empty()
    }

    /// Smoothed posteriors when available, otherwise filtered.
    pub fn best(&self) -> &[[f64; 2]] {
        self.smoothed.as_deref().unwrap_or(&self.filtered)
    }

    /// Same posteriors with the state columns exchanged.
    pub fn swapped(&self) -> Self {
        let swap = |rows: &[[f64; 2]]| rows.iter().map(|r| [r[1], r[0]]).collect::<Vec<_>>();
        Self {
            filtered: swap(&self.filtered),
            smoothed: self.smoothed.as_deref().map(swap),
            loglik: self.loglik,
        }
    }

    /// Degenerate posteriors putting all mass on a decoded sequence.
    pub fn one_hot(states: &StateSequence) -> Self {
        let rows: Vec<[f64; 2]> = states
            .states
            .iter()
            .map(|s| match s {
                State::One => [1.0, 0.0],
                State::Two => [0.0, 1.0],
            })
            .collect();
        Self {
            filtered: rows.clone(),
            smoothed: Some(rows),
            loglik: 0.0,
        }
    }
}
