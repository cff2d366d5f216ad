//! Spatial-temporal lag embedding of multichannel EEG, the envelope-difference
//! observation, and window-level correlation features.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::MultichannelSeries;

/// Which side of the anchor sample the lags extend to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LagDirection {
    /// Row `t` holds `x[t], x[t-1], ..., x[t-L+1]`.
    Past,
    /// Row `t` holds `x[t], x[t+1], ..., x[t+L-1]`; a stimulus at `t` is
    /// paired with the neural response that follows it.
    #[default]
    Future,
}

impl std::str::FromStr for LagDirection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "past" => Ok(LagDirection::Past),
            "future" => Ok(LagDirection::Future),
            other => Err(Error::InvalidParameter(format!(
                "lag direction must be `past` or `future`, got {other:?}"
            ))),
        }
    }
}

impl std::fmt::Display for LagDirection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LagDirection::Past => "past",
            LagDirection::Future => "future",
        })
    }
}

/// Design matrix of stacked channel lags, `T - L + 1` rows by `C * L` columns.
///
/// Column `c * L + l` holds channel `c` at lag `l` (channel-major, lag-minor).
#[derive(Debug, Clone, PartialEq)]
pub struct LaggedDesign {
    data: DMatrix<f64>,
    lag_count: usize,
    channels: usize,
    t_offset: usize,
    direction: LagDirection,
    source_rows: usize,
    fs_hz: f64,
}

impl LaggedDesign {
    /// Wraps an existing matrix as a design with a single lag per column.
    pub fn from_matrix(data: DMatrix<f64>, fs_hz: f64) -> Self {
        let (rows, cols) = data.shape();
        Self {
            data,
            lag_count: 1,
            channels: cols,
            t_offset: 0,
            direction: LagDirection::Future,
            source_rows: rows,
            fs_hz,
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn cols(&self) -> usize {
        self.data.ncols()
    }

    pub fn lag_count(&self) -> usize {
        self.lag_count
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Index into the source series of the first valid row.
    pub fn t_offset(&self) -> usize {
        self.t_offset
    }

    pub fn direction(&self) -> LagDirection {
        self.direction
    }

    /// Length of the series the design was built from.
    pub fn source_rows(&self) -> usize {
        self.source_rows
    }

    pub fn fs_hz(&self) -> f64 {
        self.fs_hz
    }

    pub fn get(&self, t: usize, col: usize) -> f64 {
        self.data[(t, col)]
    }

    /// `design * coefficients`, one value per valid row.
    pub fn predict(&self, coefficients: &[f64]) -> Result<Vec<f64>> {
        if coefficients.len() != self.cols() {
            return Err(Error::Dimension(format!(
                "{} coefficients for a design with {} columns",
                coefficients.len(),
                self.cols()
            )));
        }
        let beta = DVector::from_column_slice(coefficients);
        Ok((&self.data * beta).as_slice().to_vec())
    }
}

/// Builds the lagged design. Rows without a full lag window are dropped.
pub fn lag_embed(
    series: &MultichannelSeries,
    lag_count: usize,
    direction: LagDirection,
) -> Result<LaggedDesign> {
    if lag_count == 0 {
        return Err(Error::InvalidParameter("lag count must be at least 1".into()));
    }
    let t = series.rows();
    if t < lag_count {
        return Err(Error::Dimension(format!(
            "series of {t} samples is shorter than {lag_count} lags"
        )));
    }
    let channels = series.cols();
    let valid = t - lag_count + 1;
    let t_offset = match direction {
        LagDirection::Past => lag_count - 1,
        LagDirection::Future => 0,
    };
    let data = DMatrix::from_fn(valid, channels * lag_count, |k, col| {
        let (c, lag) = (col / lag_count, col % lag_count);
        let anchor = k + t_offset;
        let source = match direction {
            LagDirection::Past => anchor - lag,
            LagDirection::Future => anchor + lag,
        };
        series.get(source, c)
    });
    Ok(LaggedDesign {
        data,
        lag_count,
        channels,
        t_offset,
        direction,
        source_rows: t,
        fs_hz: series.fs_hz(),
    })
}

fn check_envelope(env: &MultichannelSeries, design: &LaggedDesign, name: &str) -> Result<()> {
    if env.cols() != 1 {
        return Err(Error::Dimension(format!(
            "{name} must be single-channel, has {} channels",
            env.cols()
        )));
    }
    if env.rows() != design.source_rows() {
        return Err(Error::Dimension(format!(
            "{name} has {} samples, EEG has {}",
            env.rows(),
            design.source_rows()
        )));
    }
    if env.fs_hz() != design.fs_hz() {
        return Err(Error::Dimension(format!(
            "{name} sampled at {} Hz, EEG at {} Hz",
            env.fs_hz(),
            design.fs_hz()
        )));
    }
    Ok(())
}

/// The part of a single-channel envelope aligned with the design rows.
pub fn aligned_envelope(env: &MultichannelSeries, design: &LaggedDesign) -> Result<Vec<f64>> {
    check_envelope(env, design, "envelope")?;
    let start = design.t_offset();
    Ok(env.as_slice()[start..start + design.rows()].to_vec())
}

/// `y[k] = env1[k + t_offset] - env2[k + t_offset]`, aligned to the design rows.
pub fn difference_observation(
    env1: &MultichannelSeries,
    env2: &MultichannelSeries,
    design: &LaggedDesign,
) -> Result<Vec<f64>> {
    check_envelope(env1, design, "env1")?;
    check_envelope(env2, design, "env2")?;
    let start = design.t_offset();
    let (a, b) = (env1.as_slice(), env2.as_slice());
    Ok((start..start + design.rows()).map(|t| a[t] - b[t]).collect())
}

/// Z-scores a single-channel series. A constant series is only centered.
pub fn zscore(env: &MultichannelSeries) -> Result<MultichannelSeries> {
    let x = env.single_channel()?;
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let scale = if var > 0.0 { var.sqrt() } else { 1.0 };
    MultichannelSeries::from_column(x.iter().map(|v| (v - mean) / scale).collect(), env.fs_hz())
}

/// Per-window Pearson correlations of the reconstruction with each envelope.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedCorrelations {
    pub r1: Vec<f64>,
    pub r2: Vec<f64>,
    pub window_len_samples: usize,
    /// Source-series index of the first sample of window 0.
    pub t_offset: usize,
    pub fs_hz: f64,
}

impl WindowedCorrelations {
    pub fn len(&self) -> usize {
        self.r1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r1.is_empty()
    }

    /// Window rate in Hz.
    pub fn rate_hz(&self) -> f64 {
        self.fs_hz / self.window_len_samples as f64
    }

    /// Centre of each window in seconds of the source series.
    pub fn centers_s(&self) -> Vec<f64> {
        let n = self.window_len_samples as f64;
        (0..self.len())
            .map(|w| (self.t_offset as f64 + w as f64 * n + n / 2.0) / self.fs_hz)
            .collect()
    }
}

const VARIANCE_GUARD: f64 = 1e-12;

/// Pearson correlation; zero when either input has (population) variance below 1e-12.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa / n < VARIANCE_GUARD || sbb / n < VARIANCE_GUARD {
        return 0.0;
    }
    (sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0)
}

/// Reconstructs `design * decoder` and correlates it with both envelopes over
/// non-overlapping windows. A trailing partial window is discarded.
pub fn window_correlations(
    design: &LaggedDesign,
    decoder: &[f64],
    env1: &MultichannelSeries,
    env2: &MultichannelSeries,
    window_len_samples: usize,
) -> Result<WindowedCorrelations> {
    if window_len_samples < 3 {
        return Err(Error::InvalidParameter(format!(
            "windows need at least 3 samples, got {window_len_samples}"
        )));
    }
    let recon = design.predict(decoder)?;
    let a = aligned_envelope(env1, design)?;
    let b = aligned_envelope(env2, design)?;
    let windows = recon.len() / window_len_samples;
    let mut r1 = Vec::with_capacity(windows);
    let mut r2 = Vec::with_capacity(windows);
    for w in 0..windows {
        let span = w * window_len_samples..(w + 1) * window_len_samples;
        r1.push(pearson(&recon[span.clone()], &a[span.clone()]));
        r2.push(pearson(&recon[span.clone()], &b[span]));
    }
    Ok(WindowedCorrelations {
        r1,
        r2,
        window_len_samples,
        t_offset: design.t_offset(),
        fs_hz: design.fs_hz(),
    })
}
