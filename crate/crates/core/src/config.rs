//! Resolved run configuration shared by the pipeline commands.

use serde::{Deserialize, Serialize};

use crate::baseline::GmmConfig;
use crate::embed::LagDirection;
use crate::error::{Error, Result};
use crate::msm::{EmConfig, Ridge};
use crate::types::TransitionModel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmSettings {
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for EmSettings {
    fn default() -> Self {
        Self {
            max_iter: 100,
            tol: 1e-6,
        }
    }
}

/// Switching probabilities are stored directly (rather than `1 - p_stay`) so
/// that expected switch rates are exact products of configured values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub lag_count: usize,
    pub lag_direction: LagDirection,
    pub fs_hz: f64,
    /// Per-sample switch probability of the sample-rate model.
    pub p_switch_sample: f64,
    /// Per-window switch probability of the window-rate HMM.
    pub p_switch_window: f64,
    pub window_len_s: f64,
    /// Ridge for decoder pretraining and the EM regressions; `None` selects
    /// a millionth of the mean Gram diagonal.
    pub ridge: Option<f64>,
    pub em: EmSettings,
    pub update_transition: bool,
    pub seed: u64,
    pub normalize_envelopes: bool,
    /// Samples a posterior must stay above 0.5 for a crossing to count.
    pub min_hold_samples: usize,
    pub gmm_restarts: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            lag_count: 6,
            lag_direction: LagDirection::Future,
            fs_hz: 10.0,
            p_switch_sample: 1e-4,
            p_switch_window: 1e-3,
            window_len_s: 1.0,
            ridge: None,
            em: EmSettings::default(),
            update_transition: false,
            seed: 0,
            normalize_envelopes: true,
            min_hold_samples: 1,
            gmm_restarts: 4,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.lag_count == 0 {
            return bad("lag_count must be at least 1".into());
        }
        if !(self.fs_hz.is_finite() && self.fs_hz > 0.0) {
            return bad(format!("fs_hz must be positive, got {}", self.fs_hz));
        }
        for (name, p) in [
            ("p_switch_sample", self.p_switch_sample),
            ("p_switch_window", self.p_switch_window),
        ] {
            if !(p > 0.0 && p < 1.0) {
                return bad(format!("{name} must lie in (0, 1), got {p}"));
            }
        }
        if !(self.window_len_s.is_finite() && self.window_len_s * self.fs_hz >= 3.0) {
            return bad(format!(
                "window of {} s at {} Hz has fewer than 3 samples",
                self.window_len_s, self.fs_hz
            ));
        }
        if let Some(r) = self.ridge {
            if !(r.is_finite() && r >= 0.0) {
                return bad(format!("ridge must be non-negative, got {r}"));
            }
        }
        if self.em.max_iter == 0 || !(self.em.tol.is_finite() && self.em.tol > 0.0) {
            return bad("em.max_iter must be >= 1 and em.tol positive".into());
        }
        if self.min_hold_samples == 0 {
            return bad("min_hold_samples must be at least 1".into());
        }
        Ok(())
    }

    pub fn p_stay_sample(&self) -> f64 {
        1.0 - self.p_switch_sample
    }

    pub fn p_stay_window(&self) -> f64 {
        1.0 - self.p_switch_window
    }

    pub fn sample_transition(&self) -> Result<TransitionModel> {
        TransitionModel::new(self.p_stay_sample())
    }

    pub fn window_transition(&self) -> Result<TransitionModel> {
        TransitionModel::new(self.p_stay_window())
    }

    pub fn window_len_samples(&self) -> usize {
        (self.window_len_s * self.fs_hz).round() as usize
    }

    /// Expected attention switches per second of the sample-rate model.
    pub fn expected_switches_per_s_sample(&self) -> f64 {
        self.p_switch_sample * self.fs_hz
    }

    /// Expected attention switches per second of the window-rate HMM.
    pub fn expected_switches_per_s_window(&self) -> f64 {
        self.p_switch_window / self.window_len_s
    }

    pub fn ridge(&self) -> Ridge {
        self.ridge.map_or(Ridge::Auto, Ridge::Fixed)
    }

    pub fn em_config(&self) -> EmConfig {
        EmConfig {
            max_iter: self.em.max_iter,
            tol: self.em.tol,
            ridge: self.ridge(),
            update_transition: self.update_transition,
        }
    }

    pub fn gmm_config(&self) -> GmmConfig {
        GmmConfig {
            restarts: self.gmm_restarts,
            seed: self.seed,
            ..GmmConfig::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = RunConfig::default();
        c.validate().unwrap();
        assert_eq!(c.window_len_samples(), 10);
        assert_eq!(c.lag_count, 6);
    }

    #[test]
    fn rejects_bad_values() {
        for c in [
            RunConfig { window_len_s: 0.2, ..Default::default() },
            RunConfig { p_switch_sample: 0.0, ..Default::default() },
            RunConfig { ridge: Some(-1.0), ..Default::default() },
        ] {
            assert!(c.validate().is_err());
        }
    }

    #[test]
    fn json_round_trip_and_unknown_fields() {
        let c = RunConfig::default();
        let text = serde_json::to_string(&c).unwrap();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, c);
        let partial: RunConfig = serde_json::from_str(r#"{"lag_count": 3}"#).unwrap();
        assert_eq!(partial.lag_count, 3);
        assert_eq!(partial.fs_hz, 10.0);
        assert!(serde_json::from_str::<RunConfig>(r#"{"lags": 3}"#).is_err());
    }
}
