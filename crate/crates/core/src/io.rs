//! File formats: CSV and raw little-endian f32 (with a JSON sidecar) for
//! series, CSV for state and posterior sequences, JSON for parameters,
//! decoders and reports.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::embed::LagDirection;
use crate::error::{Error, Result};
use crate::eval::EvalReport;
use crate::types::{MsmParams, MultichannelSeries, PosteriorSequence, StateSequence, TransitionModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesFormat {
    Csv,
    RawF32,
}

impl SeriesFormat {
    /// `.f32` and `.bin` files are raw binary, everything else CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("f32") | Some("bin") => SeriesFormat::RawF32,
            _ => SeriesFormat::Csv,
        }
    }
}

/// Sidecar describing a raw-f32 file, stored at `<path>.meta.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawMeta {
    pub rows: usize,
    pub cols: usize,
    pub fs_hz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

/// Loads a series. `fs_hz` applies to CSV input; raw-f32 takes its rate from the sidecar.
pub fn load_series(path: &Path, format: SeriesFormat, fs_hz: f64) -> Result<MultichannelSeries> {
    match format {
        SeriesFormat::Csv => load_csv(path, fs_hz),
        SeriesFormat::RawF32 => load_raw_f32(path),
    }
}

pub fn save_series(series: &MultichannelSeries, path: &Path, format: SeriesFormat) -> Result<()> {
    match format {
        SeriesFormat::Csv => save_csv(series, path),
        SeriesFormat::RawF32 => save_raw_f32(series, path),
    }
}

fn load_csv(path: &Path, fs_hz: f64) -> Result<MultichannelSeries> {
    let mut reader = csv_reader(path)?;
    let labels: Vec<String> = reader
        .headers()
        .map_err(|e| Error::parse(path, e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if labels.is_empty() || labels.iter().all(|l| l.is_empty()) {
        return Err(Error::parse(path, "missing header row"));
    }
    let cols = labels.len();
    let mut data = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::parse(path, e.to_string()))?;
        for (col, field) in record.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::parse(path, format!("row {row}, column {col}: cannot parse {field:?}"))
            })?;
            if !v.is_finite() {
                return Err(Error::NonFinite { row, col });
            }
            data.push(v);
        }
    }
    let rows = data.len() / cols;
    MultichannelSeries::new(data, rows, cols, fs_hz, Some(labels))
}

fn save_csv(series: &MultichannelSeries, path: &Path) -> Result<()> {
    let mut out = create(path)?;
    let write = |out: &mut BufWriter<fs::File>| -> std::io::Result<()> {
        writeln!(out, "{}", series.channel_names().join(","))?;
        for t in 0..series.rows() {
            let line: Vec<String> = series.row(t).iter().map(|v| format!("{v:.8e}")).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        out.flush()
    };
    write(&mut out).map_err(|e| Error::io(path, e))
}

fn load_raw_f32(path: &Path) -> Result<MultichannelSeries> {
    let meta_path = sidecar_path(path);
    let meta: RawMeta = read_json(&meta_path)?;
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let expected = meta.rows * meta.cols * 4;
    if bytes.len() != expected {
        return Err(Error::ByteCountMismatch {
            expected,
            actual: bytes.len(),
        });
    }
    let data: Vec<f64> = bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
        .collect();
    MultichannelSeries::new(data, meta.rows, meta.cols, meta.fs_hz, meta.labels)
}

fn save_raw_f32(series: &MultichannelSeries, path: &Path) -> Result<()> {
    let mut bytes = Vec::with_capacity(series.as_slice().len() * 4);
    for v in series.as_slice() {
        bytes.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
    let meta = RawMeta {
        rows: series.rows(),
        cols: series.cols(),
        fs_hz: series.fs_hz(),
        labels: series.labels().map(|l| l.to_vec()),
    };
    write_json(&sidecar_path(path), &meta)
}

/// Writes a state sequence as `t,state` with `t` in seconds from `t0_s`.
pub fn save_states(states: &StateSequence, t0_s: f64, path: &Path) -> Result<()> {
    let mut out = create(path)?;
    let write = |out: &mut BufWriter<fs::File>| -> std::io::Result<()> {
        writeln!(out, "t,state")?;
        for (k, s) in states.states.iter().enumerate() {
            writeln!(out, "{},{}", t0_s + k as f64 / states.fs_hz, s.label())?;
        }
        out.flush()
    };
    write(&mut out).map_err(|e| Error::io(path, e))
}

/// Reads the `state` column of a CSV file.
pub fn load_states(path: &Path, fs_hz: f64) -> Result<StateSequence> {
    let mut reader = csv_reader(path)?;
    let headers = reader
        .headers()
        .map_err(|e| Error::parse(path, e.to_string()))?
        .clone();
    let col = headers
        .iter()
        .position(|h| h.trim() == "state")
        .ok_or_else(|| Error::parse(path, "no `state` column"))?;
    let mut labels = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::parse(path, e.to_string()))?;
        let field = record.get(col).unwrap_or("").trim();
        let v: f64 = field
            .parse()
            .map_err(|_| Error::parse(path, format!("row {row}: cannot parse state {field:?}")))?;
        if v.fract() != 0.0 {
            return Err(Error::parse(path, format!("row {row}: state {v} is not an integer")));
        }
        labels.push(v as i64);
    }
    StateSequence::from_labels(&labels, fs_hz).map_err(|e| Error::parse(path, e.to_string()))
}

/// Shortest round-trip form, in exponent notation for small magnitudes.
struct Prob(f64);

impl std::fmt::Display for Prob {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.0 != 0.0 && self.0.abs() < 1e-4 {
            write!(f, "{:e}", self.0)
        } else {
            write!(f, "{}", self.0)
        }
    }
}

/// Writes posteriors as `t,p1_filtered,p2_filtered[,p1_smoothed,p2_smoothed]`.
/// `times_s` gives the timestamp of each row.
pub fn save_posteriors(posteriors: &PosteriorSequence, times_s: &[f64], path: &Path) -> Result<()> {
    if times_s.len() != posteriors.len() {
        return Err(Error::Dimension(format!(
            "{} timestamps for {} posterior rows",
            times_s.len(),
            posteriors.len()
        )));
    }
    let mut out = create(path)?;
    let write = |out: &mut BufWriter<fs::File>| -> std::io::Result<()> {
        match &posteriors.smoothed {
            Some(smoothed) => {
                writeln!(out, "t,p1_filtered,p2_filtered,p1_smoothed,p2_smoothed")?;
                for ((t, f), s) in times_s.iter().zip(&posteriors.filtered).zip(smoothed) {
                    writeln!(out, "{t},{},{},{},{}", Prob(f[0]), Prob(f[1]), Prob(s[0]), Prob(s[1]))?;
                }
            }
            None => {
                writeln!(out, "t,p1_filtered,p2_filtered")?;
                for (t, f) in times_s.iter().zip(&posteriors.filtered) {
                    writeln!(out, "{t},{},{}", Prob(f[0]), Prob(f[1]))?;
                }
            }
        }
        out.flush()
    };
    write(&mut out).map_err(|e| Error::io(path, e))
}

/// Reads a posterior CSV written by [`save_posteriors`]. The log-likelihood is not stored and reads as 0.
pub fn load_posteriors(path: &Path) -> Result<(Vec<f64>, PosteriorSequence)> {
    let mut reader = csv_reader(path)?;
    let headers = reader
        .headers()
        .map_err(|e| Error::parse(path, e.to_string()))?
        .clone();
    let find = |name: &str| headers.iter().position(|h| h.trim() == name);
    let t_col = find("t").ok_or_else(|| Error::parse(path, "no `t` column"))?;
    let f_cols = match (find("p1_filtered"), find("p2_filtered")) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::parse(path, "missing filtered posterior columns")),
    };
    let s_cols = match (find("p1_smoothed"), find("p2_smoothed")) {
        (Some(a), Some(b)) => Some((a, b)),
        _ => None,
    };
    let mut times = Vec::new();
    let mut filtered = Vec::new();
    let mut smoothed = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::parse(path, e.to_string()))?;
        let get = |col: usize| -> Result<f64> {
            let field = record.get(col).unwrap_or("").trim();
            let v: f64 = field.parse().map_err(|_| {
                Error::parse(path, format!("row {row}, column {col}: cannot parse {field:?}"))
            })?;
            if !v.is_finite() {
                return Err(Error::NonFinite { row, col });
            }
            Ok(v)
        };
        times.push(get(t_col)?);
        filtered.push([get(f_cols.0)?, get(f_cols.1)?]);
        if let Some((a, b)) = s_cols {
            smoothed.push([get(a)?, get(b)?]);
        }
    }
    Ok((
        times,
        PosteriorSequence {
            filtered,
            smoothed: s_cols.map(|_| smoothed),
            loglik: 0.0,
        },
    ))
}

/// On-disk form of fitted switching-regression parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsFile {
    pub beta1: Vec<f64>,
    pub beta2: Vec<f64>,
    pub sigma2: [f64; 2],
    pub p_stay: f64,
    pub initial: [f64; 2],
    pub lag_count: usize,
    pub direction: LagDirection,
}

impl ParamsFile {
    pub fn new(params: &MsmParams, lag_count: usize, direction: LagDirection) -> Self {
        Self {
            beta1: params.beta1.clone(),
            beta2: params.beta2.clone(),
            sigma2: params.sigma2,
            p_stay: params.transition.p_stay,
            initial: params.transition.initial,
            lag_count,
            direction,
        }
    }

    pub fn to_params(&self) -> Result<MsmParams> {
        let transition = TransitionModel::with_initial(self.p_stay, self.initial)?;
        MsmParams::new(self.beta1.clone(), self.beta2.clone(), self.sigma2, transition)
    }
}

/// On-disk form of a pretrained decoder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecoderFile {
    pub beta: Vec<f64>,
    pub mse: f64,
    pub lag_count: usize,
    pub direction: LagDirection,
}

pub fn save_report(report: &EvalReport, path: &Path) -> Result<()> {
    report.validate()?;
    write_json(path, report)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text =
        serde_json::to_string_pretty(value).map_err(|e| Error::parse(path, e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn csv_reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    fs::File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, bytes: &[u8]) -> PathBuf {
        let p = dir.join(name);
        fs::write(&p, bytes).unwrap();
        p
    }

    #[test]
    fn csv_parses_header_and_rows() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "x.csv", b"a,b\n1,2\n3,4\n5,6\n");
        let s = load_series(&p, SeriesFormat::Csv, 10.0).unwrap();
        assert_eq!((s.rows(), s.cols()), (3, 2));
        assert_eq!(s.as_slice(), &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(s.labels().unwrap(), &["a".to_string(), "b".to_string()]);
        assert_eq!(s.fs_hz(), 10.0);
    }

    #[test]
    fn csv_rejects_nan_with_position() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "x.csv", b"a,b\n1,2\n3,NaN\n");
        let err = load_series(&p, SeriesFormat::Csv, 10.0).unwrap_err();
        assert!(matches!(err, Error::NonFinite { row: 1, col: 1 }), "{err}");
        let p = write(dir.path(), "y.csv", b"a\ninf\n");
        assert!(matches!(
            load_series(&p, SeriesFormat::Csv, 10.0).unwrap_err(),
            Error::NonFinite { row: 0, col: 0 }
        ));
    }

    #[test]
    fn csv_header_only_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "x.csv", b"a\n");
        assert!(load_series(&p, SeriesFormat::Csv, 10.0).is_err());
    }

    #[test]
    fn missing_file_names_path() {
        let err = load_series(Path::new("/nonexistent/q.csv"), SeriesFormat::Csv, 10.0)
            .unwrap_err();
        assert!(err.to_string().contains("/nonexistent/q.csv"));
    }

    #[test]
    fn raw_f32_reads_with_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let bytes: Vec<u8> = [1f32, 2., 3., 4., 5., 6.]
            .iter()
            .flat_map(|v| v.to_le_bytes())
            .collect();
        assert_eq!(bytes.len(), 24);
        let p = write(dir.path(), "x.f32", &bytes);
        write(dir.path(), "x.f32.meta.json", br#"{"rows":3,"cols":2,"fs_hz":10}"#);
        let s = load_series(&p, SeriesFormat::RawF32, 1.0).unwrap();
        assert_eq!((s.rows(), s.cols()), (3, 2));
        assert_eq!(s.get(2, 1), 6.0);
        assert_eq!(s.fs_hz(), 10.0);
    }

    #[test]
    fn raw_f32_byte_count_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "x.f32", &[0u8; 24]);
        write(dir.path(), "x.f32.meta.json", br#"{"rows":4,"cols":2,"fs_hz":10}"#);
        let err = load_series(&p, SeriesFormat::RawF32, 1.0).unwrap_err();
        assert!(matches!(err, Error::ByteCountMismatch { expected: 32, actual: 24 }));
        assert!(err.to_string().contains("byte count mismatch"));
    }

    #[test]
    fn raw_f32_missing_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "x.f32", &[0u8; 8]);
        assert!(matches!(
            load_series(&p, SeriesFormat::RawF32, 1.0).unwrap_err(),
            Error::Io { .. }
        ));
    }

    #[test]
    fn states_and_posteriors_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let states = StateSequence::from_labels(&[1, 2, 2, 1], 10.0).unwrap();
        let p = dir.path().join("s.csv");
        save_states(&states, 0.5, &p).unwrap();
        assert_eq!(load_states(&p, 10.0).unwrap(), states);

        let post = PosteriorSequence {
            filtered: vec![[0.25, 0.75], [0.125, 0.875]],
            smoothed: None,
            loglik: -3.0,
        };
        let p = dir.path().join("p.csv");
        save_posteriors(&post, &[0.0, 0.1], &p).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("t,p1_filtered,p2_filtered\n"));
        let (times, back) = load_posteriors(&p).unwrap();
        assert_eq!(times, vec![0.0, 0.1]);
        assert_eq!(back.filtered, post.filtered);
        assert!(back.smoothed.is_none());
    }

    #[test]
    fn bad_state_label_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "s.csv", b"state\n1\n3\n");
        assert!(load_states(&p, 10.0).is_err());
    }
}
