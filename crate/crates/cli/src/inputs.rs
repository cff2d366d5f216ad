//! Locating and loading recordings.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use msm_core::config::RunConfig;
use msm_core::embed::zscore;
use msm_core::io::{load_series, load_states, SeriesFormat};
use msm_core::{MultichannelSeries, StateSequence};

/// Input recording, either as a directory written by `simulate` or as
/// individual files.
#[derive(Args, Debug, Clone, Default)]
pub struct RecordingArgs {
    /// Recording directory holding `eeg`, `env1`, `env2` and optionally
    /// `states` files (`.csv` or `.f32`). Repeat to process several.
    #[arg(long = "recording", value_name = "DIR", conflicts_with_all = ["eeg", "env1", "env2"])]
    pub recordings: Vec<PathBuf>,
    /// Multichannel EEG, one column per channel.
    #[arg(long)]
    pub eeg: Option<PathBuf>,
    /// Envelope of speaker 1.
    #[arg(long)]
    pub env1: Option<PathBuf>,
    /// Envelope of speaker 2.
    #[arg(long)]
    pub env2: Option<PathBuf>,
    /// Ground-truth attention states (`state` column, labels 1 and 2).
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct RecordingPaths {
    pub name: String,
    pub eeg: PathBuf,
    pub env1: PathBuf,
    pub env2: PathBuf,
    pub truth: Option<PathBuf>,
}

/// Picks `dir/stem.csv` or `dir/stem.f32`, whichever exists. Falls back to
/// the CSV name so a load error names a concrete path.
pub fn locate(dir: &Path, stem: &str) -> PathBuf {
    let csv = dir.join(format!("{stem}.csv"));
    let raw = dir.join(format!("{stem}.f32"));
    if !csv.exists() && raw.exists() {
        raw
    } else {
        csv
    }
}

impl RecordingArgs {
    pub fn resolve(&self) -> Result<Vec<RecordingPaths>> {
        if self.recordings.is_empty() {
            let (Some(eeg), Some(env1), Some(env2)) = (&self.eeg, &self.env1, &self.env2) else {
                bail!(msm_core::Error::InvalidParameter(
                    "give --recording DIR or all of --eeg, --env1 and --env2".into()
                ));
            };
            return Ok(vec![RecordingPaths {
                name: "recording".into(),
                eeg: eeg.clone(),
                env1: env1.clone(),
                env2: env2.clone(),
                truth: self.truth.clone(),
            }]);
        }
        let mut out: Vec<RecordingPaths> = Vec::new();
        for dir in &self.recordings {
            let name = dir
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_else(|| "recording".into());
            if out.iter().any(|r| r.name == name) {
                bail!(msm_core::Error::InvalidParameter(format!(
                    "two recordings are named {name:?}; output directories would collide"
                )));
            }
            let states = locate(dir, "states");
            let truth = match &self.truth {
                Some(t) if self.recordings.len() == 1 => Some(t.clone()),
                Some(_) => bail!(msm_core::Error::InvalidParameter(
                    "--truth applies to a single recording; put a states file in each directory".into()
                )),
                None => states.exists().then_some(states),
            };
            out.push(RecordingPaths {
                name,
                eeg: locate(dir, "eeg"),
                env1: locate(dir, "env1"),
                env2: locate(dir, "env2"),
                truth,
            });
        }
        Ok(out)
    }
}

/// Names the file in a load error unless the error already carries the path.
pub fn named<T>(path: &Path, result: msm_core::Result<T>) -> Result<T> {
    result.map_err(|err| match err {
        msm_core::Error::Io { .. } | msm_core::Error::Parse { .. } => err.into(),
        other => anyhow::Error::new(other).context(format!("cannot load {}", path.display())),
    })
}

pub fn load(path: &Path, config: &RunConfig) -> Result<MultichannelSeries> {
    let series = named(path, load_series(path, SeriesFormat::from_path(path), config.fs_hz))?;
    if series.fs_hz() != config.fs_hz {
        bail!(msm_core::Error::InvalidParameter(format!(
            "{} is sampled at {} Hz but the run is configured for {} Hz (set --fs)",
            path.display(),
            series.fs_hz(),
            config.fs_hz
        )));
    }
    Ok(series)
}

/// Loads an envelope, z-scoring it when the config asks for it.
pub fn load_envelope(path: &Path, config: &RunConfig) -> Result<MultichannelSeries> {
    let env = load(path, config)?;
    if config.normalize_envelopes {
        zscore(&env).with_context(|| format!("cannot normalize {}", path.display()))
    } else {
        Ok(env)
    }
}

pub fn load_truth(path: &Path, samples: usize, config: &RunConfig) -> Result<StateSequence> {
    let truth = named(path, load_states(path, config.fs_hz))?;
    if truth.len() != samples {
        bail!(msm_core::Error::Dimension(format!(
            "{} has {} states for {samples} samples",
            path.display(),
            truth.len()
        )));
    }
    Ok(truth)
}

pub struct Recording {
    pub eeg: MultichannelSeries,
    pub env1: MultichannelSeries,
    pub env2: MultichannelSeries,
    pub truth: Option<StateSequence>,
}

impl Recording {
    pub fn load(paths: &RecordingPaths, config: &RunConfig) -> Result<Self> {
        let eeg = load(&paths.eeg, config)?;
        let env1 = load_envelope(&paths.env1, config)?;
        let env2 = load_envelope(&paths.env2, config)?;
        for (path, env) in [(&paths.env1, &env1), (&paths.env2, &env2)] {
            if env.rows() != eeg.rows() {
                bail!(msm_core::Error::Dimension(format!(
                    "{} has {} samples, the EEG has {}",
                    path.display(),
                    env.rows(),
                    eeg.rows()
                )));
            }
        }
        let truth = match &paths.truth {
            Some(p) => Some(load_truth(p, eeg.rows(), config)?),
            None => None,
        };
        Ok(Self { eeg, env1, env2, truth })
    }
}
