use std::f64::consts::PI;

use crate::embed::LaggedDesign;
use crate::error::{Error, Result};
use crate::types::MsmParams;

/// `loglik[t][i] = log f(y_t | S_t = i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmissionLogLik {
    pub loglik: Vec<[f64; 2]>,
}

impl EmissionLogLik {
    /// Wraps precomputed log-emissions, rejecting non-finite entries.
    pub fn new(loglik: Vec<[f64; 2]>) -> Result<Self> {
        if let Some(t) = loglik.iter().position(|r| !(r[0].is_finite() && r[1].is_finite())) {
            return Err(Error::InvalidParameter(format!(
                "non-finite log-emission at t={t}"
            )));
        }
        Ok(Self { loglik })
    }

    pub fn len(&self) -> usize {
        self.loglik.len()
    }

    pub fn is_empty(&self) -> bool {
        self.loglik.is_empty()
    }
}

/// Gaussian log-density of `residual` under variance `sigma2`.
pub(crate) fn normal_logpdf(residual: f64, sigma2: f64) -> f64 {
    -0.5 * (2.0 * PI * sigma2).ln() - residual * residual / (2.0 * sigma2)
}

pub fn emission_loglik(y: &[f64], design: &LaggedDesign, params: &MsmParams) -> Result<EmissionLogLik> {
    params.validate()?;
    if y.len() != design.rows() {
        return Err(Error::Dimension(format!(
            "{} observations for {} design rows",
            y.len(),
            design.rows()
        )));
    }
    let fit1 = design.predict(&params.beta1)?;
    let fit2 = design.predict(&params.beta2)?;
    let [s1, s2] = params.sigma2;
    let loglik = y
        .iter()
        .zip(fit1.iter().zip(&fit2))
        .map(|(&yt, (&a, &b))| [normal_logpdf(yt - a, s1), normal_logpdf(yt - b, s2)])
        .collect();
    EmissionLogLik::new(loglik)
}
