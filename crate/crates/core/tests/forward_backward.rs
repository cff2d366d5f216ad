mod common;

use common::oracle::enumerate;
use msm_core::msm::{backward_smooth, forward_pass, EmissionLogLik};
use msm_core::TransitionModel;
use proptest::prelude::*;

fn emissions_strategy() -> impl Strategy<Value = Vec<[f64; 2]>> {
    proptest::collection::vec((-8.0f64..2.0, -8.0f64..2.0).prop_map(|(a, b)| [a, b]), 1..=12)
}

fn transition_strategy() -> impl Strategy<Value = TransitionModel> {
    (0.01f64..0.99, 0.0f64..=1.0)
        .prop_map(|(p, a)| TransitionModel::with_initial(p, [a, 1.0 - a]).unwrap())
        .prop_filter("initial must leave mass on some state", |t| t.initial.iter().any(|p| *p > 0.0))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn matches_path_enumeration(le in emissions_strategy(), tm in transition_strategy()) {
        let oracle = enumerate(&le, tm.matrix(), tm.initial);
        let post = backward_smooth(&forward_pass(&EmissionLogLik::new(le).unwrap(), &tm).unwrap(), &tm).unwrap();
        prop_assert!((post.loglik - oracle.loglik).abs() < 1e-10);
        let smoothed = post.smoothed.unwrap();
        for t in 0..oracle.filtered.len() {
            for i in 0..2 {
                prop_assert!((post.filtered[t][i] - oracle.filtered[t][i]).abs() < 1e-10);
                prop_assert!((smoothed[t][i] - oracle.smoothed[t][i]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn rows_are_probability_vectors(
        le in proptest::collection::vec((-500.0f64..5.0, -500.0f64..5.0).prop_map(|(a, b)| [a, b]), 1..400),
        p in 0.5f64..0.99999,
    ) {
        let tm = TransitionModel::new(p).unwrap();
        let post = backward_smooth(&forward_pass(&EmissionLogLik::new(le).unwrap(), &tm).unwrap(), &tm).unwrap();
        for row in post.filtered.iter().chain(post.smoothed.as_ref().unwrap()) {
            prop_assert!((row[0] + row[1] - 1.0).abs() < 1e-12);
            prop_assert!(row.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn invariant_to_per_step_shift(
        le in emissions_strategy(),
        shifts in proptest::collection::vec(-50.0f64..50.0, 12),
        p in 0.05f64..0.95,
    ) {
        let tm = TransitionModel::new(p).unwrap();
        let shifted: Vec<[f64; 2]> = le.iter().zip(&shifts).map(|(r, c)| [r[0] + c, r[1] + c]).collect();
        let a = forward_pass(&EmissionLogLik::new(le.clone()).unwrap(), &tm).unwrap();
        let b = forward_pass(&EmissionLogLik::new(shifted).unwrap(), &tm).unwrap();
        for (x, y) in a.filtered.iter().zip(&b.filtered) {
            prop_assert!((x[0] - y[0]).abs() < 1e-12 && (x[1] - y[1]).abs() < 1e-12);
        }
        let added: f64 = shifts.iter().take(le.len()).sum();
        prop_assert!((b.loglik - a.loglik - added).abs() < 1e-9);
    }
}

#[test]
fn long_sequence_does_not_underflow() {
    // 100k samples with strongly separated emissions
    let le: Vec<[f64; 2]> = (0..100_000)
        .map(|t| if (t / 1000) % 2 == 0 { [-1.0, -40.0] } else { [-40.0, -1.0] })
        .collect();
    let tm = TransitionModel::new(1.0 - 1e-4).unwrap();
    let post = backward_smooth(&forward_pass(&EmissionLogLik::new(le).unwrap(), &tm).unwrap(), &tm).unwrap();
    assert!(post.loglik.is_finite());
    let sm = post.smoothed.unwrap();
    assert!(sm[500][0] > 0.99 && sm[1500][1] > 0.99);
}
