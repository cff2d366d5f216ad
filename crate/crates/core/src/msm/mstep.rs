use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::embed::LaggedDesign;
use crate::error::{Error, Result};

/// Lower bound applied to every re-estimated noise variance.
pub const SIGMA2_FLOOR: f64 = 1e-10;

/// Relative pivot size below which a Cholesky factor is treated as singular.
const PIVOT_TOLERANCE: f64 = 1e-13;

/// Tikhonov term added to the weighted Gram matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase", tag = "kind", content = "value")]
pub enum Ridge {
    /// `1e-6 * trace(G) / dim`, i.e. a millionth of the mean Gram diagonal.
    #[default]
    Auto,
    Fixed(f64),
}

impl Ridge {
    fn resolve(self, gram: &DMatrix<f64>) -> Result<f64> {
        match self {
            Ridge::Auto => Ok(1e-6 * gram.trace() / gram.nrows() as f64),
            Ridge::Fixed(r) if r >= 0.0 && r.is_finite() => Ok(r),
            Ridge::Fixed(r) => Err(Error::InvalidParameter(format!(
                "ridge must be non-negative, got {r}"
            ))),
        }
    }
}

fn check_weights(weights: &[f64], rows: usize) -> Result<f64> {
    if weights.len() != rows {
        return Err(Error::Dimension(format!(
            "{} weights for {rows} design rows",
            weights.len()
        )));
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::InvalidParameter("weights must be finite and non-negative".into()));
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::InvalidParameter(
            "weights sum to zero: no posterior mass supports this state".into(),
        ));
    }
    Ok(total)
}

/// Weighted ridge least squares: solves `(X' W X + ridge I) beta = X' W y`
/// by Cholesky factorisation.
pub fn m_step_beta(design: &LaggedDesign, y: &[f64], weights: &[f64], ridge: Ridge) -> Result<Vec<f64>> {
    let x = design.matrix();
    if y.len() != x.nrows() {
        return Err(Error::Dimension(format!(
            "{} observations for {} design rows",
            y.len(),
            x.nrows()
        )));
    }
    check_weights(weights, x.nrows())?;
    let w = DVector::from_column_slice(weights);
    let mut xw = x.clone();
    for mut column in xw.column_iter_mut() {
        column.component_mul_assign(&w);
    }
    let mut gram = x.tr_mul(&xw);
    let rhs = xw.tr_mul(&DVector::from_column_slice(y));
    let lambda = ridge.resolve(&gram)?;
    for i in 0..gram.nrows() {
        gram[(i, i)] += lambda;
    }
    solve_spd(gram, rhs).map(|b| b.as_slice().to_vec())
}

/// Solves a symmetric positive-definite system, reporting numerical singularity.
pub(crate) fn solve_spd(gram: DMatrix<f64>, rhs: DVector<f64>) -> Result<DVector<f64>> {
    let scale = gram.diagonal().iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::Singular("Gram matrix is zero".into()));
    }
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::Singular("Gram matrix is not positive definite".into()))?;
    let min_pivot = chol
        .l_dirty()
        .diagonal()
        .iter()
        .fold(f64::INFINITY, |a, &b| a.min(b * b));
    if min_pivot < PIVOT_TOLERANCE * scale {
        return Err(Error::Singular(format!(
            "smallest Cholesky pivot {min_pivot:e} relative to scale {scale:e}"
        )));
    }
    Ok(chol.solve(&rhs))
}

/// Posterior-weighted mean squared residual, floored at [`SIGMA2_FLOOR`].
pub fn m_step_sigma(design: &LaggedDesign, y: &[f64], beta: &[f64], weights: &[f64]) -> Result<f64> {
    if y.len() != design.rows() {
        return Err(Error::Dimension(format!(
            "{} observations for {} design rows",
            y.len(),
            design.rows()
        )));
    }
    let total = check_weights(weights, design.rows())?;
    let fit = design.predict(beta)?;
    let sse: f64 = y
        .iter()
        .zip(&fit)
        .zip(weights)
        .map(|((yt, ft), w)| w * (yt - ft).powi(2))
        .sum();
    Ok((sse / total).max(SIGMA2_FLOOR))
}
