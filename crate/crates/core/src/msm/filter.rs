use super::emission::EmissionLogLik;
use crate::error::{Error, Result};
use crate::types::{PosteriorSequence, TransitionModel};

/// Filtered posteriors `Pr(S_t | y_1..y_t)` and the observed-data log-likelihood.
///
/// `transition.initial` is the prior of the first observed sample. Each step
/// predicts through the transition matrix, multiplies by the max-shifted
/// emission likelihoods and renormalises; the log of each normaliser (plus the
/// shift) accumulates into `loglik`.
pub fn forward_pass(emissions: &EmissionLogLik, transition: &TransitionModel) -> Result<PosteriorSequence> {
    let m = transition.matrix();
    let mut filtered = Vec::with_capacity(emissions.len());
    let mut loglik = 0.0;
    let mut prev: Option<[f64; 2]> = None;
    for (t, le) in emissions.loglik.iter().enumerate() {
        if !(le[0].is_finite() && le[1].is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "non-finite log-emission at t={t}"
            )));
        }
        let pred = match prev {
            None => transition.initial,
            Some(f) => [
                f[0] * m[0][0] + f[1] * m[1][0],
                f[0] * m[0][1] + f[1] * m[1][1],
            ],
        };
        let shift = le[0].max(le[1]);
        let w = [
            pred[0] * (le[0] - shift).exp(),
            pred[1] * (le[1] - shift).exp(),
        ];
        let norm = w[0] + w[1];
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::Underflow { t });
        }
        let f = [w[0] / norm, w[1] / norm];
        loglik += shift + norm.ln();
        filtered.push(f);
        prev = Some(f);
    }
    Ok(PosteriorSequence {
        filtered,
        smoothed: None,
        loglik,
    })
}

/// One-step prediction `Pr(S_{t+1} = j | y_1..y_t)` from a filtered row.
fn predict(f: &[f64; 2], m: &[[f64; 2]; 2]) -> [f64; 2] {
    [
        f[0] * m[0][0] + f[1] * m[1][0],
        f[0] * m[0][1] + f[1] * m[1][1],
    ]
}

/// Adds smoothed posteriors `Pr(S_t | y_1..y_T)` by the backward recursion
/// over filtered probabilities.
pub fn backward_smooth(filtered: &PosteriorSequence, transition: &TransitionModel) -> Result<PosteriorSequence> {
    let f = &filtered.filtered;
    for (t, row) in f.iter().enumerate() {
        if (row[0] + row[1] - 1.0).abs() > 1e-9 || row[0] < 0.0 || row[1] < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "filtered row {t} is not a probability vector: {row:?}"
            )));
        }
    }
    let n = f.len();
    let m = transition.matrix();
    let mut smoothed = vec![[0.0; 2]; n];
    if n == 0 {
        return Ok(PosteriorSequence {
            smoothed: Some(smoothed),
            ..filtered.clone()
        });
    }
    smoothed[n - 1] = f[n - 1];
    for t in (0..n - 1).rev() {
        let pred = predict(&f[t], &m);
        let next = smoothed[t + 1];
        // ratio[j] = Pr(S_{t+1}=j | y_1..y_T) / Pr(S_{t+1}=j | y_1..y_t)
        let mut ratio = [0.0; 2];
        for j in 0..2 {
            if next[j] == 0.0 {
                continue;
            }
            if pred[j] <= 0.0 {
                return Err(Error::ZeroDenominator { t });
            }
            ratio[j] = next[j] / pred[j];
        }
        let mut row = [
            f[t][0] * (m[0][0] * ratio[0] + m[0][1] * ratio[1]),
            f[t][1] * (m[1][0] * ratio[0] + m[1][1] * ratio[1]),
        ];
        let total = row[0] + row[1];
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::ZeroDenominator { t });
        }
        row[0] /= total;
        row[1] /= total;
        smoothed[t] = row;
    }
    Ok(PosteriorSequence {
        filtered: f.clone(),
        smoothed: Some(smoothed),
        loglik: filtered.loglik,
    })
}

/// Posterior expected fraction of transitions that stay in the same state,
/// `sum_t [xi_t(1,1) + xi_t(2,2)] / (T - 1)`. Used when the shared
/// self-transition probability is re-estimated.
pub fn expected_stay_fraction(posteriors: &PosteriorSequence, transition: &TransitionModel) -> Result<f64> {
    let smoothed = posteriors
        .smoothed
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("smoothed posteriors required".into()))?;
    let f = &posteriors.filtered;
    let n = f.len();
    if n < 2 {
        return Ok(transition.p_stay);
    }
    let m = transition.matrix();
    let mut stay = 0.0;
    for t in 0..n - 1 {
        let pred = predict(&f[t], &m);
        for i in 0..2 {
            if smoothed[t + 1][i] > 0.0 && pred[i] > 0.0 {
                stay += f[t][i] * m[i][i] * smoothed[t + 1][i] / pred[i];
            }
        }
    }
    Ok(stay / (n - 1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn emissions(rows: Vec<[f64; 2]>) -> EmissionLogLik {
        EmissionLogLik::new(rows).unwrap()
    }

    /// Path joint probability of the first `len` samples along `path`.
    fn path_prob(le: &[[f64; 2]], tm: &TransitionModel, path: u32, len: usize) -> f64 {
        let m = tm.matrix();
        let s = |t: usize| ((path >> t) & 1) as usize;
        let mut p = tm.initial[s(0)] * le[0][s(0)].exp();
        for t in 1..len {
            p *= m[s(t - 1)][s(t)] * le[t][s(t)].exp();
        }
        p
    }

    /// Marginals and log-likelihood by summing over every state path.
    fn enumerate(le: &[[f64; 2]], tm: &TransitionModel) -> (Vec<[f64; 2]>, Vec<[f64; 2]>, f64) {
        let n = le.len();
        let mut filtered = Vec::new();
        for t in 0..n {
            let mut acc = [0.0; 2];
            for path in 0u32..(1 << (t + 1)) {
                acc[((path >> t) & 1) as usize] += path_prob(le, tm, path, t + 1);
            }
            let z = acc[0] + acc[1];
            filtered.push([acc[0] / z, acc[1] / z]);
        }
        let mut smoothed = vec![[0.0; 2]; n];
        let mut total = 0.0;
        for path in 0u32..(1 << n) {
            let p = path_prob(le, tm, path, n);
            total += p;
            for (t, row) in smoothed.iter_mut().enumerate() {
                row[((path >> t) & 1) as usize] += p;
            }
        }
        for row in &mut smoothed {
            row[0] /= total;
            row[1] /= total;
        }
        (filtered, smoothed, total.ln())
    }

    #[test]
    fn equal_emissions_stay_uniform() {
        let tm = TransitionModel::new(0.8).unwrap();
        let post = forward_pass(&emissions(vec![[-1.3, -1.3]; 7]), &tm).unwrap();
        for row in &post.filtered {
            assert_eq!(*row, [0.5, 0.5]);
        }
    }

    #[test]
    fn single_bayes_update() {
        let tm = TransitionModel::new(0.8).unwrap();
        let post = forward_pass(&emissions(vec![[0.9f64.ln(), 0.1f64.ln()]]), &tm).unwrap();
        assert!((post.filtered[0][0] - 0.9).abs() < 1e-15);
        assert!((post.filtered[0][1] - 0.1).abs() < 1e-15);
        assert!((post.loglik - 0.5f64.ln()).abs() < 1e-15);
        let sm = backward_smooth(&post, &tm).unwrap();
        assert_eq!(sm.smoothed.unwrap(), sm.filtered);
    }

    #[test]
    fn memoryless_chain_smoothed_equals_filtered() {
        let tm = TransitionModel::new(0.5).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let le: Vec<[f64; 2]> = (0..20)
            .map(|_| [rng.gen_range(-5.0..0.0), rng.gen_range(-5.0..0.0)])
            .collect();
        let sm = backward_smooth(&forward_pass(&emissions(le), &tm).unwrap(), &tm).unwrap();
        for (a, b) in sm.filtered.iter().zip(sm.smoothed.as_ref().unwrap()) {
            assert!((a[0] - b[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn matches_enumeration_t10() {
        let tm = TransitionModel::new(0.8).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let le: Vec<[f64; 2]> = (0..10)
            .map(|_| [rng.gen_range(-4.0..1.0), rng.gen_range(-4.0..1.0)])
            .collect();
        let (f_ref, s_ref, ll_ref) = enumerate(&le, &tm);
        let post = backward_smooth(&forward_pass(&emissions(le), &tm).unwrap(), &tm).unwrap();
        assert!((post.loglik - ll_ref).abs() < 1e-10);
        for t in 0..10 {
            for i in 0..2 {
                assert!((post.filtered[t][i] - f_ref[t][i]).abs() < 1e-10);
                assert!((post.smoothed.as_ref().unwrap()[t][i] - s_ref[t][i]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn underflow_is_reported() {
        // state 2 impossible a priori and at t=1 only state 2 could have moved
        let tm = TransitionModel::with_initial(1.0, [0.0, 1.0]).unwrap();
        let err = forward_pass(&emissions(vec![[0.0, -1e300]]), &tm).unwrap_err();
        assert!(matches!(err, Error::Underflow { t: 0 }));
    }

    #[test]
    fn absorbing_chain_smooths() {
        let tm = TransitionModel::with_initial(1.0, [1.0, 0.0]).unwrap();
        let post = forward_pass(&emissions(vec![[-1.0, -0.1]; 4]), &tm).unwrap();
        let sm = backward_smooth(&post, &tm).unwrap();
        for row in sm.smoothed.unwrap() {
            assert_eq!(row, [1.0, 0.0]);
        }
    }

    #[test]
    fn unnormalised_filtered_rejected() {
        let tm = TransitionModel::new(0.9).unwrap();
        let bad = PosteriorSequence {
            filtered: vec![[0.7, 0.7]],
            smoothed: None,
            loglik: 0.0,
        };
        assert!(backward_smooth(&bad, &tm).is_err());
    }

    #[test]
    fn stay_fraction_of_certain_path() {
        let tm = TransitionModel::new(0.9).unwrap();
        // near-deterministic emissions: 1,1,2,2 -> one switch in three steps
        let le = vec![[0.0, -200.0], [0.0, -200.0], [-200.0, 0.0], [-200.0, 0.0]];
        let post = backward_smooth(&forward_pass(&emissions(le), &tm).unwrap(), &tm).unwrap();
        let stay = expected_stay_fraction(&post, &tm).unwrap();
        assert!((stay - 2.0 / 3.0).abs() < 1e-9);
    }
}
