use msm_core::eval::EvalReport;
use msm_core::io::{load_series, save_report, save_series, SeriesFormat};
use msm_core::MultichannelSeries;
use proptest::prelude::*;

fn series_strategy() -> impl Strategy<Value = MultichannelSeries> {
    (1usize..5, 1usize..40).prop_flat_map(|(c, t)| {
        proptest::collection::vec(-1e6f64..1e6, c * t)
            .prop_map(move |data| MultichannelSeries::new(data, t, c, 128.0, None).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn csv_round_trip_within_nine_digits(s in series_strategy()) {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        save_series(&s, &p, SeriesFormat::Csv).unwrap();
        let back = load_series(&p, SeriesFormat::Csv, s.fs_hz()).unwrap();
        prop_assert_eq!(back.rows(), s.rows());
        prop_assert_eq!(back.cols(), s.cols());
        for (a, b) in s.as_slice().iter().zip(back.as_slice()) {
            prop_assert!((a - b).abs() <= 1e-6 * a.abs().max(1e-300));
        }
    }

    #[test]
    fn raw_f32_round_trip_is_bit_exact(s in series_strategy()) {
        let dir = tempfile::tempdir().unwrap();
        // values representable in f32, as after a first load from disk
        let data: Vec<f64> = s.as_slice().iter().map(|v| *v as f32 as f64).collect();
        let s = MultichannelSeries::new(data, s.rows(), s.cols(), s.fs_hz(), Some((0..s.cols()).map(|c| format!("e{c}")).collect())).unwrap();
        let p = dir.path().join("s.f32");
        save_series(&s, &p, SeriesFormat::RawF32).unwrap();
        let back = load_series(&p, SeriesFormat::RawF32, 1.0).unwrap();
        prop_assert_eq!(back.fs_hz(), s.fs_hz());
        prop_assert_eq!(back.labels(), s.labels());
        for (a, b) in s.as_slice().iter().zip(back.as_slice()) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}

fn report(times: Vec<f64>, accuracy: f64) -> EvalReport {
    let n = times.len();
    let mean = (n > 0).then(|| times.iter().sum::<f64>() / n as f64);
    EvalReport {
        accuracy,
        switch_times_s: times,
        mean_switch_time_s: mean,
        missed_switches: 0,
        n_true_switches: n,
        config: serde_json::json!({"b": 1, "a": 2}),
    }
}

#[test]
fn report_json_keys_and_values() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("r.json");
    save_report(&report(vec![], 1.0), &p).unwrap();
    let text = std::fs::read_to_string(&p).unwrap();
    let compact: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    assert!(compact.contains("\"accuracy\":1.0"));
    let keys = ["accuracy", "switch_times_s", "mean_switch_time_s", "missed_switches", "n_true_switches", "config"];
    let positions: Vec<usize> = keys.iter().map(|k| text.find(&format!("\"{k}\"")).unwrap()).collect();
    assert!(positions.windows(2).all(|w| w[0] < w[1]), "key order {positions:?}");
    // config maps are written with sorted keys
    assert!(compact.contains("\"config\":{\"a\":2,\"b\":1}"));

    save_report(&report(vec![2.0, 4.0], 0.5), &p).unwrap();
    let compact: String = std::fs::read_to_string(&p).unwrap().chars().filter(|c| !c.is_whitespace()).collect();
    assert!(compact.contains("\"mean_switch_time_s\":3.0"));
}

#[test]
fn nan_report_is_not_written() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("r.json");
    assert!(save_report(&report(vec![], f64::NAN), &p).is_err());
    assert!(!p.exists());
}

#[test]
fn unwritable_path() {
    assert!(save_report(&report(vec![], 1.0), std::path::Path::new("/nonexistent/dir/r.json")).is_err());
}
