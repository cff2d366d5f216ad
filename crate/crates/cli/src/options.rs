use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use msm_core::config::RunConfig;
use msm_core::embed::LagDirection;

/// Run configuration flags shared by the pipeline commands.
#[derive(Args, Debug, Clone, Default)]
pub struct ConfigArgs {
    /// JSON run configuration; the flags below override its fields.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Number of time lags per EEG channel.
    #[arg(long)]
    pub lags: Option<usize>,
    /// Side of the anchor sample the lags extend to (`past` or `future`).
    #[arg(long)]
    pub direction: Option<LagDirection>,
    /// Sampling rate of CSV inputs in Hz.
    #[arg(long)]
    pub fs: Option<f64>,
    /// Probability of keeping the attended speaker for one step of the
    /// model being run: per sample for `fit`, per window for `hmm`.
    #[arg(long)]
    pub p_stay: Option<f64>,
    /// Correlation window length in seconds.
    #[arg(long)]
    pub window_s: Option<f64>,
    /// Fixed ridge penalty; defaults to a millionth of the mean Gram diagonal.
    #[arg(long)]
    pub ridge: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Relative log-likelihood change at which EM stops.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Z-score the envelopes before use (default true).
    #[arg(long, num_args = 0..=1, default_missing_value = "true", value_name = "BOOL")]
    pub normalize: Option<bool>,
    /// Re-estimate the switching probability during EM.
    #[arg(long)]
    pub update_transition: bool,
    /// Steps a posterior must stay above 0.5 for a detected switch to count.
    #[arg(long)]
    pub min_hold: Option<usize>,
}

/// Which model `--p-stay` refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rate {
    Sample,
    Window,
}

impl ConfigArgs {
    pub fn resolve(&self, rate: Rate) -> Result<RunConfig> {
        let mut config = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("cannot read config {}", path.display()))?;
                serde_json::from_str(&text)
                    .with_context(|| format!("invalid config {}", path.display()))?
            }
            None => RunConfig::default(),
        };
        if let Some(v) = self.lags {
            config.lag_count = v;
        }
        if let Some(v) = self.direction {
            config.lag_direction = v;
        }
        if let Some(v) = self.fs {
            config.fs_hz = v;
        }
        if let Some(p) = self.p_stay {
            match rate {
                Rate::Sample => config.p_switch_sample = 1.0 - p,
                Rate::Window => config.p_switch_window = 1.0 - p,
            }
        }
        if let Some(v) = self.window_s {
            config.window_len_s = v;
        }
        if let Some(v) = self.ridge {
            config.ridge = Some(v);
        }
        if let Some(v) = self.max_iter {
            config.em.max_iter = v;
        }
        if let Some(v) = self.tol {
            config.em.tol = v;
        }
        if let Some(v) = self.seed {
            config.seed = v;
        }
        if let Some(v) = self.normalize {
            config.normalize_envelopes = v;
        }
        if self.update_transition {
            config.update_transition = true;
        }
        if let Some(v) = self.min_hold {
            config.min_hold_samples = v;
        }
        config.validate()?;
        Ok(config)
    }
}

