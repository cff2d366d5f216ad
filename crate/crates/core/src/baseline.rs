//! Window-level comparison pipeline: least-squares decoder pretraining,
//! an unsupervised two-component Gaussian mixture over pooled correlations,
//! and HMM smoothing of the per-window correlation pair.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::embed::{LaggedDesign, WindowedCorrelations};
use crate::error::{Error, Result};
use crate::msm::{backward_smooth, decode, forward_pass, m_step_beta, EmissionLogLik, Ridge};
use crate::types::{PosteriorSequence, StateSequence, TransitionModel};

/// Linear stimulus-reconstruction decoder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LsDecoder {
    pub beta: Vec<f64>,
    /// Mean squared training residual.
    pub mse: f64,
}

/// Ridge least squares from the lagged design to the attended envelope.
pub fn train_ls_decoder(design: &LaggedDesign, attended_env: &[f64], ridge: Ridge) -> Result<LsDecoder> {
    if attended_env.len() != design.rows() {
        return Err(Error::Dimension(format!(
            "{} envelope samples for {} design rows",
            attended_env.len(),
            design.rows()
        )));
    }
    if attended_env.is_empty() {
        return Err(Error::Dimension("empty training data".into()));
    }
    let ones = vec![1.0; design.rows()];
    let beta = m_step_beta(design, attended_env, &ones, ridge)?;
    let fit = design.predict(&beta)?;
    let mse = attended_env
        .iter()
        .zip(&fit)
        .map(|(y, f)| (y - f).powi(2))
        .sum::<f64>()
        / attended_env.len() as f64;
    Ok(LsDecoder { beta, mse })
}

/// Two-component 1-D Gaussian mixture, the higher-mean component labelled attended.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gmm2 {
    pub mean_att: f64,
    pub mean_unatt: f64,
    pub var_att: f64,
    pub var_unatt: f64,
    pub weight_att: f64,
}

impl Gmm2 {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.mean_att, self.mean_unatt, self.var_att, self.var_unatt, self.weight_att]
            .iter()
            .all(|v| v.is_finite());
        if !finite
            || self.mean_att < self.mean_unatt
            || self.var_att <= 0.0
            || self.var_unatt <= 0.0
            || !(self.weight_att > 0.0 && self.weight_att < 1.0)
        {
            return Err(Error::InvalidParameter(format!("invalid mixture {self:?}")));
        }
        Ok(())
    }

    pub fn log_density_att(&self, x: f64) -> f64 {
        normal_logpdf(x, self.mean_att, self.var_att)
    }

    pub fn log_density_unatt(&self, x: f64) -> f64 {
        normal_logpdf(x, self.mean_unatt, self.var_unatt)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GmmConfig {
    pub max_iter: usize,
    pub tol: f64,
    /// Random restarts on top of the median-split initialisation.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for GmmConfig {
    fn default() -> Self {
        Self {
            max_iter: 500,
            tol: 1e-10,
            restarts: 4,
            seed: 0,
        }
    }
}

/// Fitted mixture together with its EM log-likelihood trace.
#[derive(Debug, Clone, PartialEq)]
pub struct GmmFit {
    pub gmm: Gmm2,
    pub loglik: f64,
    pub loglik_trace: Vec<f64>,
}

pub const GMM_VAR_FLOOR: f64 = 1e-8;

fn normal_logpdf(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * (2.0 * std::f64::consts::PI * var).ln() - (x - mean).powi(2) / (2.0 * var)
}

fn log_add(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Component parameters: (weight, mean, variance) for components a and b.
type Components = [(f64, f64, f64); 2];

fn mixture_loglik(values: &[f64], c: &Components) -> f64 {
    values
        .iter()
        .map(|&x| {
            log_add(
                c[0].0.ln() + normal_logpdf(x, c[0].1, c[0].2),
                c[1].0.ln() + normal_logpdf(x, c[1].1, c[1].2),
            )
        })
        .sum()
}

fn run_em(values: &[f64], mut c: Components, config: &GmmConfig) -> (Components, Vec<f64>) {
    let n = values.len() as f64;
    let mut trace = vec![mixture_loglik(values, &c)];
    for _ in 0..config.max_iter {
        let mut stats = [(0.0, 0.0, 0.0); 2];
        for &x in values {
            let la = c[0].0.ln() + normal_logpdf(x, c[0].1, c[0].2);
            let lb = c[1].0.ln() + normal_logpdf(x, c[1].1, c[1].2);
            let z = log_add(la, lb);
            let ra = (la - z).exp();
            let rb = (lb - z).exp();
            stats[0].0 += ra;
            stats[0].1 += ra * x;
            stats[1].0 += rb;
            stats[1].1 += rb * x;
        }
        for s in &mut stats {
            s.1 /= s.0.max(f64::MIN_POSITIVE);
        }
        for &x in values {
            let la = c[0].0.ln() + normal_logpdf(x, c[0].1, c[0].2);
            let lb = c[1].0.ln() + normal_logpdf(x, c[1].1, c[1].2);
            let z = log_add(la, lb);
            stats[0].2 += (la - z).exp() * (x - stats[0].1).powi(2);
            stats[1].2 += (lb - z).exp() * (x - stats[1].1).powi(2);
        }
        let mut next = c;
        for k in 0..2 {
            let nk = stats[k].0;
            if nk <= 0.0 {
                // empty component: keep its previous shape
                continue;
            }
            next[k] = (
                (nk / n).clamp(1e-12, 1.0 - 1e-12),
                stats[k].1,
                (stats[k].2 / nk).max(GMM_VAR_FLOOR),
            );
        }
        let ll = mixture_loglik(values, &next);
        let prev = *trace.last().unwrap();
        c = next;
        trace.push(ll);
        if (ll - prev).abs() <= config.tol * ll.abs().max(1.0) {
            break;
        }
    }
    (c, trace)
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    (m, v.max(GMM_VAR_FLOOR))
}

/// 1-D EM for a two-component mixture.
///
/// Starts from a median split (lower half one component, upper half the
/// other) plus `restarts` random initialisations and keeps the highest
/// likelihood fit. Variances are floored at [`GMM_VAR_FLOOR`].
pub fn fit_gmm2(values: &[f64], config: &GmmConfig) -> Result<GmmFit> {
    if values.len() < 4 {
        return Err(Error::Degenerate(format!(
            "mixture fit needs at least 4 values, got {}",
            values.len()
        )));
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { row: i, col: 0 });
    }
    let first = values[0];
    if values.iter().all(|&v| v == first) {
        return Err(Error::Degenerate("all values identical: no mixture structure".into()));
    }

    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let half = sorted.len() / 2;
    let (lm, lv) = mean_var(&sorted[..half]);
    let (um, uv) = mean_var(&sorted[half..]);
    let (_, total_var) = mean_var(values);

    let mut starts: Vec<Components> = vec![[(0.5, lm, lv), (0.5, um, uv)]];
    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
    for _ in 0..config.restarts {
        let a = values[rng.gen_range(0..values.len())];
        let b = values[rng.gen_range(0..values.len())];
        let w = rng.gen_range(0.2..0.8);
        starts.push([(w, a, total_var), (1.0 - w, b, total_var)]);
    }

    let mut best: Option<(Components, Vec<f64>)> = None;
    for start in starts {
        let (c, trace) = run_em(values, start, config);
        let ll = *trace.last().unwrap();
        if ll.is_finite() && best.as_ref().is_none_or(|(_, t)| ll > *t.last().unwrap()) {
            best = Some((c, trace));
        }
    }
    let (c, trace) = best.ok_or_else(|| Error::Degenerate("mixture EM diverged".into()))?;
    let (att, unatt) = if c[0].1 >= c[1].1 { (c[0], c[1]) } else { (c[1], c[0]) };
    let gmm = Gmm2 {
        mean_att: att.1,
        mean_unatt: unatt.1,
        var_att: att.2,
        var_unatt: unatt.2,
        weight_att: att.0,
    };
    Ok(GmmFit {
        gmm,
        loglik: *trace.last().unwrap(),
        loglik_trace: trace,
    })
}

/// Window-rate HMM output.
#[derive(Debug, Clone, PartialEq)]
pub struct HmmResult {
    pub posteriors: PosteriorSequence,
    pub decoded: StateSequence,
    pub window_len_samples: usize,
}

/// Per-window log-emissions, treating the two correlations as independent
/// given the state: state 1 means speaker 1 is attended.
pub fn correlation_emissions(corrs: &WindowedCorrelations, gmm: &Gmm2) -> Result<EmissionLogLik> {
    gmm.validate()?;
    let rows = corrs
        .r1
        .iter()
        .zip(&corrs.r2)
        .map(|(&a, &b)| {
            [
                gmm.log_density_att(a) + gmm.log_density_unatt(b),
                gmm.log_density_unatt(a) + gmm.log_density_att(b),
            ]
        })
        .collect();
    EmissionLogLik::new(rows)
}

/// Forward-backward smoothing of the window correlations; decodes the
/// smoothed posteriors.
pub fn hmm_postprocess(corrs: &WindowedCorrelations, gmm: &Gmm2, transition: &TransitionModel) -> Result<HmmResult> {
    let emissions = correlation_emissions(corrs, gmm)?;
    let filtered = forward_pass(&emissions, transition)?;
    let posteriors = backward_smooth(&filtered, transition)?;
    let decoded = decode(&posteriors, true, corrs.rate_hz())?;
    Ok(HmmResult {
        posteriors,
        decoded,
        window_len_samples: corrs.window_len_samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::State;
    use nalgebra::DMatrix;
    use rand_distr::{Distribution, Normal};

    fn corrs(r1: Vec<f64>, r2: Vec<f64>) -> WindowedCorrelations {
        WindowedCorrelations {
            r1,
            r2,
            window_len_samples: 10,
            t_offset: 0,
            fs_hz: 10.0,
        }
    }

    fn gmm() -> Gmm2 {
        Gmm2 {
            mean_att: 0.3,
            mean_unatt: 0.0,
            var_att: 0.01,
            var_unatt: 0.01,
            weight_att: 0.5,
        }
    }

    #[test]
    fn exact_interpolation() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let x = DMatrix::from_fn(30, 3, |_, _| rng.gen_range(-1.0..1.0));
        let truth = nalgebra::DVector::from_vec(vec![0.5, -1.0, 2.0]);
        let y = (&x * &truth).as_slice().to_vec();
        let d = LaggedDesign::from_matrix(x, 10.0);
        let dec = train_ls_decoder(&d, &y, Ridge::Fixed(0.0)).unwrap();
        assert!(dec.mse < 1e-18);
    }

    #[test]
    fn zero_design() {
        let d = LaggedDesign::from_matrix(DMatrix::zeros(20, 2), 10.0);
        assert!(train_ls_decoder(&d, &[1.0; 20], Ridge::Fixed(0.0)).is_err());
        let dec = train_ls_decoder(&d, &[1.0; 20], Ridge::Fixed(0.1)).unwrap();
        assert_eq!(dec.beta, vec![0.0, 0.0]);
        assert_eq!(dec.mse, 1.0);
    }

    #[test]
    fn two_point_data() {
        let fit = fit_gmm2(&[-1.0, -1.0, 1.0, 1.0], &GmmConfig::default()).unwrap();
        assert!((fit.gmm.mean_att - 1.0).abs() < 1e-9);
        assert!((fit.gmm.mean_unatt + 1.0).abs() < 1e-9);
    }

    #[test]
    fn constant_data_rejected() {
        assert!(matches!(
            fit_gmm2(&[0.2; 10], &GmmConfig::default()).unwrap_err(),
            Error::Degenerate(_)
        ));
        assert!(fit_gmm2(&[0.1, 0.2, 0.3], &GmmConfig::default()).is_err());
    }

    #[test]
    fn gmm_recovers_means_and_is_monotone() {
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        let a = Normal::new(0.3, 0.1).unwrap();
        let b = Normal::new(-0.1, 0.1).unwrap();
        let values: Vec<f64> = (0..500)
            .map(|_| if rng.gen_bool(0.6) { a.sample(&mut rng) } else { b.sample(&mut rng) })
            .collect();
        let fit = fit_gmm2(&values, &GmmConfig::default()).unwrap();
        assert!((fit.gmm.mean_att - 0.3).abs() < 0.03, "{:?}", fit.gmm);
        assert!((fit.gmm.mean_unatt + 0.1).abs() < 0.03, "{:?}", fit.gmm);
        for w in fit.loglik_trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-8);
        }
    }

    #[test]
    fn hmm_examples() {
        let tm = TransitionModel::new(1.0 - 1e-3).unwrap();
        let res = hmm_postprocess(&corrs(vec![0.3; 8], vec![0.0; 8]), &gmm(), &tm).unwrap();
        assert!(res.decoded.states.iter().all(|s| *s == State::One));
        let res = hmm_postprocess(&corrs(vec![0.0; 8], vec![0.3; 8]), &gmm(), &tm).unwrap();
        assert!(res.decoded.states.iter().all(|s| *s == State::Two));
        let res = hmm_postprocess(&corrs(vec![0.15; 8], vec![0.15; 8]), &gmm(), &tm).unwrap();
        for row in res.posteriors.smoothed.unwrap() {
            assert_eq!(row, [0.5, 0.5]);
        }
        assert_eq!(res.decoded.fs_hz, 1.0);
    }

    #[test]
    fn hmm_swap_symmetry() {
        let tm = TransitionModel::new(0.95).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let r1: Vec<f64> = (0..60).map(|_| rng.gen_range(-0.2..0.5)).collect();
        let r2: Vec<f64> = (0..60).map(|_| rng.gen_range(-0.2..0.5)).collect();
        let a = hmm_postprocess(&corrs(r1.clone(), r2.clone()), &gmm(), &tm).unwrap();
        let b = hmm_postprocess(&corrs(r2, r1), &gmm(), &tm).unwrap();
        for (x, y) in a.decoded.states.iter().zip(&b.decoded.states) {
            assert_eq!(*x, y.other());
        }
    }

    #[test]
    fn invalid_gmm_rejected() {
        let mut g = gmm();
        g.mean_att = -1.0;
        let tm = TransitionModel::new(0.9).unwrap();
        assert!(hmm_postprocess(&corrs(vec![0.1; 4], vec![0.1; 4]), &g, &tm).is_err());
    }
}
