use serde::{Deserialize, Serialize};

use super::emission::emission_loglik;
use super::filter::{backward_smooth, expected_stay_fraction, forward_pass};
use super::mstep::{m_step_beta, m_step_sigma, Ridge};
use crate::embed::LaggedDesign;
use crate::error::{Error, Result};
use crate::types::{MsmParams, PosteriorSequence, TransitionModel};

/// Log-likelihood drops larger than this abort the fit.
const MONOTONE_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmConfig {
    pub max_iter: usize,
    /// Relative log-likelihood change `|dL| / max(1, |L|)` that counts as converged.
    pub tol: f64,
    pub ridge: Ridge,
    /// Re-estimate the shared self-transition probability. Off by default:
    /// the transition probabilities act as a smoothness hyperparameter.
    pub update_transition: bool,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            max_iter: 100,
            tol: 1e-6,
            ridge: Ridge::Auto,
            update_transition: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmFitResult {
    pub params: MsmParams,
    /// Posteriors under `params` (filtered and smoothed).
    pub posteriors: PosteriorSequence,
    /// Observed-data log-likelihood of every E-step, first entry at the initial parameters.
    pub loglik_trace: Vec<f64>,
    /// Number of M-steps performed.
    pub iterations: usize,
    pub converged: bool,
}

/// Initial parameters from a decoder pretrained on the attended envelope:
/// `beta1 = beta*`, `beta2 = -beta*`, both variances set to its training MSE.
pub fn init_from_pretrained(beta_star: &[f64], mse_star: f64, transition: TransitionModel) -> Result<MsmParams> {
    if !(mse_star.is_finite() && mse_star > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "pretrained decoder MSE must be positive, got {mse_star}"
        )));
    }
    if beta_star.iter().all(|b| *b == 0.0) {
        log::warn!("pretrained decoder is all zeros: both states start identical and EM cannot break the symmetry");
    }
    let negated = beta_star.iter().map(|b| -b).collect();
    MsmParams::new(beta_star.to_vec(), negated, [mse_star, mse_star], transition)
}

fn e_step(design: &LaggedDesign, y: &[f64], params: &MsmParams) -> Result<PosteriorSequence> {
    let emissions = emission_loglik(y, design, params)?;
    let filtered = forward_pass(&emissions, &params.transition)?;
    backward_smooth(&filtered, &params.transition)
}

fn m_step(
    design: &LaggedDesign,
    y: &[f64],
    posteriors: &PosteriorSequence,
    current: &MsmParams,
    config: &EmConfig,
) -> Result<MsmParams> {
    let smoothed = posteriors
        .smoothed
        .as_ref()
        .expect("E-step always smooths");
    let mut betas = Vec::with_capacity(2);
    let mut sigma2 = [0.0; 2];
    for i in 0..2 {
        let w: Vec<f64> = smoothed.iter().map(|r| r[i]).collect();
        let beta = m_step_beta(design, y, &w, config.ridge)?;
        sigma2[i] = m_step_sigma(design, y, &beta, &w)?;
        betas.push(beta);
    }
    let mut transition = current.transition;
    if config.update_transition {
        let stay = expected_stay_fraction(posteriors, &current.transition)?;
        transition.p_stay = stay.clamp(1e-12, 1.0 - 1e-12);
    }
    let beta2 = betas.pop().unwrap();
    let beta1 = betas.pop().unwrap();
    MsmParams::new(beta1, beta2, sigma2, transition)
}

/// Expectation-maximisation over the full recording.
///
/// Each iteration smooths the states under the current parameters, then
/// re-fits both state regressions by posterior-weighted least squares and
/// their noise variances by posterior-weighted mean squared residual. Stops
/// when the relative log-likelihood change falls below `tol` or after
/// `max_iter` M-steps; the returned posteriors always belong to the returned
/// parameters.
pub fn fit_em(design: &LaggedDesign, y: &[f64], init: &MsmParams, config: &EmConfig) -> Result<EmFitResult> {
    init.validate()?;
    if init.dim() != design.cols() {
        return Err(Error::Dimension(format!(
            "parameters have {} coefficients, design has {} columns",
            init.dim(),
            design.cols()
        )));
    }
    if y.len() != design.rows() {
        return Err(Error::Dimension(format!(
            "{} observations for {} design rows",
            y.len(),
            design.rows()
        )));
    }
    let mut params = init.clone();
    let mut posteriors = e_step(design, y, &params)?;
    let mut trace = vec![posteriors.loglik];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < config.max_iter {
        let next = m_step(design, y, &posteriors, &params, config)?;
        let next_post = e_step(design, y, &next)?;
        iterations += 1;
        let previous = *trace.last().unwrap();
        let current = next_post.loglik;
        if current < previous - MONOTONE_SLACK {
            return Err(Error::NonMonotone {
                iteration: iterations,
                previous,
                current,
            });
        }
        trace.push(current);
        params = next;
        posteriors = next_post;
        log::debug!("EM iteration {iterations}: loglik {current:.6}");
        if (current - previous).abs() / current.abs().max(1.0) < config.tol {
            converged = true;
            break;
        }
    }
    Ok(EmFitResult {
        params,
        posteriors,
        loglik_trace: trace,
        iterations,
        converged,
    })
}
