//! Exhaustive path enumeration for two-state chains. Independent of the
//! library's recursions: it sums joint path probabilities directly.

#![allow(dead_code)]

pub struct Enumerated {
    pub filtered: Vec<[f64; 2]>,
    pub smoothed: Vec<[f64; 2]>,
    pub loglik: f64,
}

/// `le[t][i]` is the log-emission of state `i` at `t`; `m[i][j]` the
/// transition probability; `initial` the prior of the first sample.
pub fn enumerate(le: &[[f64; 2]], m: [[f64; 2]; 2], initial: [f64; 2]) -> Enumerated {
    let n = le.len();
    assert!((1..=20).contains(&n));
    // shift each step so the enumeration stays in range; added back to loglik
    let shifts: Vec<f64> = le.iter().map(|r| r[0].max(r[1])).collect();
    let path_prob = |path: u32, len: usize| -> f64 {
        let s = |t: usize| ((path >> t) & 1) as usize;
        let mut p = initial[s(0)] * (le[0][s(0)] - shifts[0]).exp();
        for t in 1..len {
            p *= m[s(t - 1)][s(t)] * (le[t][s(t)] - shifts[t]).exp();
        }
        p
    };
    let mut filtered = Vec::with_capacity(n);
    for t in 0..n {
        let mut acc = [0.0; 2];
        for path in 0u32..(1 << (t + 1)) {
            acc[((path >> t) & 1) as usize] += path_prob(path, t + 1);
        }
        let z = acc[0] + acc[1];
        filtered.push([acc[0] / z, acc[1] / z]);
    }
    let mut smoothed = vec![[0.0; 2]; n];
    let mut total = 0.0;
    for path in 0u32..(1 << n) {
        let p = path_prob(path, n);
        total += p;
        for (t, row) in smoothed.iter_mut().enumerate() {
            row[((path >> t) & 1) as usize] += p;
        }
    }
    for row in &mut smoothed {
        row[0] /= total;
        row[1] /= total;
    }
    Enumerated {
        filtered,
        smoothed,
        loglik: total.ln() + shifts.iter().sum::<f64>(),
    }
}
