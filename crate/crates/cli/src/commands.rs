use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use msm_core::baseline::{fit_gmm2, hmm_postprocess, train_ls_decoder};
use msm_core::config::RunConfig;
use msm_core::embed::{aligned_envelope, difference_observation, lag_embed, window_correlations, WindowedCorrelations};
use msm_core::eval::evaluate;
use msm_core::io::{
    load_posteriors, load_states, read_json, save_posteriors, save_report, save_series, save_states, write_json,
    DecoderFile, ParamsFile, SeriesFormat,
};
use msm_core::msm::{decode, fit_em, init_from_pretrained};
use msm_core::synth::{generate_synthetic, SynthSpec};
use msm_core::{Error, MultichannelSeries, PosteriorSequence, State, StateSequence};
use serde::Serialize;

use crate::inputs::{load, load_envelope, named, Recording, RecordingArgs, RecordingPaths};
use crate::options::{ConfigArgs, Rate};

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    F32,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// JSON spec of the synthetic recording.
    #[arg(long, value_name = "FILE")]
    pub spec: PathBuf,
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Overrides the seed in the spec.
    #[arg(long)]
    pub seed: Option<u64>,
    /// File format of the generated series.
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

pub fn simulate(args: &SimulateArgs) -> Result<()> {
    let mut spec: SynthSpec = read_json(&args.spec)?;
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let rec = generate_synthetic(&spec).context("invalid spec")?;
    create_dir(&args.out)?;
    let (format, ext) = match args.format {
        Format::Csv => (SeriesFormat::Csv, "csv"),
        Format::F32 => (SeriesFormat::RawF32, "f32"),
    };
    for (name, series) in [("eeg", &rec.eeg), ("env1", &rec.env1), ("env2", &rec.env2)] {
        save_series(series, &args.out.join(format!("{name}.{ext}")), format)?;
    }
    save_states(&rec.states, 0.0, &args.out.join("states.csv"))?;
    let params = ParamsFile::new(&rec.true_params, spec.lag_count, spec.direction);
    write_json(&args.out.join("true_params.json"), &params)?;
    write_json(&args.out.join("spec.json"), &spec)?;

    let expected = (1.0 - spec.p_stay) * spec.samples as f64;
    println!(
        "wrote {} samples ({} s at {} Hz) to {}",
        spec.samples,
        spec.samples as f64 / spec.fs_hz,
        spec.fs_hz,
        args.out.display()
    );
    println!(
        "attention switches: {} drawn, {expected:.2} expected",
        rec.states.switch_indices().len()
    );
    Ok(())
}

#[derive(Args, Debug)]
pub struct PretrainArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    #[command(flatten)]
    pub input: RecordingArgs,
    /// Envelope of the attended speaker; replaces --env1, --env2 and --truth.
    #[arg(long, value_name = "FILE", conflicts_with_all = ["recordings", "env1", "env2", "truth"])]
    pub attended: Option<PathBuf>,
    /// Output decoder JSON.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

pub fn pretrain(args: &PretrainArgs) -> Result<()> {
    let config = args.config.resolve(Rate::Sample)?;
    let (eeg, attended) = match &args.attended {
        Some(att) => {
            let Some(eeg) = &args.input.eeg else {
                bail!(Error::InvalidParameter("--attended needs --eeg".into()));
            };
            (load(eeg, &config)?, load_envelope(att, &config)?)
        }
        None => {
            let paths = args.input.resolve()?;
            let [paths] = paths.as_slice() else {
                bail!(Error::InvalidParameter("pretrain takes a single recording".into()));
            };
            if paths.truth.is_none() {
                bail!(Error::InvalidParameter(
                    "the attended envelope is unknown: give --attended, or --truth with --env1 and --env2".into()
                ));
            }
            let rec = Recording::load(paths, &config)?;
            let attended = attended_envelope(&rec)?;
            (rec.eeg, attended)
        }
    };
    let design = lag_embed(&eeg, config.lag_count, config.lag_direction)?;
    let target = aligned_envelope(&attended, &design)?;
    let decoder = train_ls_decoder(&design, &target, config.ridge())?;
    let file = DecoderFile {
        beta: decoder.beta,
        mse: decoder.mse,
        lag_count: config.lag_count,
        direction: config.lag_direction,
    };
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    write_json(&args.out, &file)?;
    println!("training MSE: {}", file.mse);
    Ok(())
}

/// Picks the envelope of whichever speaker the truth marks as attended.
fn attended_envelope(rec: &Recording) -> Result<MultichannelSeries> {
    let truth = rec.truth.as_ref().expect("truth loaded");
    let (a, b) = (rec.env1.single_channel()?, rec.env2.single_channel()?);
    let values = truth
        .states
        .iter()
        .enumerate()
        .map(|(t, s)| match s {
            State::One => a[t],
            State::Two => b[t],
        })
        .collect();
    Ok(MultichannelSeries::from_column(values, rec.env1.fs_hz())?)
}

#[derive(Args, Debug)]
pub struct FitArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    #[command(flatten)]
    pub input: RecordingArgs,
    /// Pretrained decoder JSON written by `pretrain`.
    #[arg(long, value_name = "FILE")]
    pub decoder: PathBuf,
    /// Output directory; one subdirectory per recording when several are given.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Decode from filtered posteriors and write only those.
    #[arg(long)]
    pub causal: bool,
    /// Recordings processed in parallel.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Serialize)]
struct EmSummary<'a> {
    iterations: usize,
    converged: bool,
    loglik_trace: &'a [f64],
}

pub fn fit(args: &FitArgs) -> Result<()> {
    let config = args.config.resolve(Rate::Sample)?;
    let decoder = load_decoder(&args.decoder, &config)?;
    let paths = args.input.resolve()?;
    run_all(&paths, &args.out, args.jobs, |p, out| fit_one(p, out, &config, &decoder, args.causal))
}

fn load_decoder(path: &Path, config: &RunConfig) -> Result<DecoderFile> {
    let decoder: DecoderFile = read_json(path)?;
    if decoder.lag_count != config.lag_count || decoder.direction != config.lag_direction {
        bail!(Error::InvalidParameter(format!(
            "{} was trained with {} {} lags but the run uses {} {} lags",
            path.display(),
            decoder.lag_count,
            decoder.direction,
            config.lag_count,
            config.lag_direction
        )));
    }
    Ok(decoder)
}

fn check_decoder_dim(decoder: &DecoderFile, dim: usize) -> Result<()> {
    if decoder.beta.len() != dim {
        bail!(Error::Dimension(format!(
            "decoder has {} coefficients, the lagged EEG has {dim} columns",
            decoder.beta.len()
        )));
    }
    Ok(())
}

fn fit_one(paths: &RecordingPaths, out: &Path, config: &RunConfig, decoder: &DecoderFile, causal: bool) -> Result<String> {
    let rec = Recording::load(paths, config)?;
    let design = lag_embed(&rec.eeg, config.lag_count, config.lag_direction)?;
    check_decoder_dim(decoder, design.cols())?;
    let y = difference_observation(&rec.env1, &rec.env2, &design)?;
    let init = init_from_pretrained(&decoder.beta, decoder.mse, config.sample_transition()?)?;
    let fit = fit_em(&design, &y, &init, &config.em_config()).context("EM failed")?;

    let mut posteriors = fit.posteriors;
    if causal {
        posteriors.smoothed = None;
    }
    let decoded = decode(&posteriors, !causal, config.fs_hz)?;
    let t0 = design.t_offset() as f64 / config.fs_hz;
    let times: Vec<f64> = (0..design.rows()).map(|k| t0 + k as f64 / config.fs_hz).collect();

    create_dir(out)?;
    let params = ParamsFile::new(&fit.params, config.lag_count, config.lag_direction);
    write_json(&out.join("params.json"), &params)?;
    let summary = EmSummary {
        iterations: fit.iterations,
        converged: fit.converged,
        loglik_trace: &fit.loglik_trace,
    };
    write_json(&out.join("em.json"), &summary)?;
    save_posteriors(&posteriors, &times, &out.join("posteriors.csv"))?;
    save_states(&decoded, t0, &out.join("decoded.csv"))?;

    let loglik = fit.loglik_trace.last().copied().unwrap_or(f64::NAN);
    let mut line = format!("{}: {} EM iterations, log-likelihood {loglik:.6}", paths.name, fit.iterations);
    if let Some(truth) = &rec.truth {
        let truth = truth.slice(design.t_offset(), design.rows())?;
        let mut report_config = serde_json::to_value(config)?;
        report_config["causal"] = causal.into();
        let report = evaluate(&posteriors, &decoded, &truth, config.fs_hz, config.min_hold_samples, report_config)?;
        save_report(&report, &out.join("report.json"))?;
        line.push_str(&report_summary(&report));
    }
    Ok(line)
}

#[derive(Args, Debug)]
pub struct HmmArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    #[command(flatten)]
    pub input: RecordingArgs,
    /// Decoder JSON used to reconstruct the envelope.
    #[arg(long, value_name = "FILE")]
    pub decoder: PathBuf,
    /// Output directory; one subdirectory per recording when several are given.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Recordings processed in parallel.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

pub fn hmm(args: &HmmArgs) -> Result<()> {
    let config = args.config.resolve(Rate::Window)?;
    let decoder = load_decoder(&args.decoder, &config)?;
    let paths = args.input.resolve()?;
    run_all(&paths, &args.out, args.jobs, |p, out| hmm_one(p, out, &config, &decoder))
}

fn hmm_one(paths: &RecordingPaths, out: &Path, config: &RunConfig, decoder: &DecoderFile) -> Result<String> {
    let rec = Recording::load(paths, config)?;
    let design = lag_embed(&rec.eeg, config.lag_count, config.lag_direction)?;
    check_decoder_dim(decoder, design.cols())?;
    let corrs = window_correlations(&design, &decoder.beta, &rec.env1, &rec.env2, config.window_len_samples())?;
    let pooled: Vec<f64> = corrs.r1.iter().chain(&corrs.r2).copied().collect();
    let gmm = fit_gmm2(&pooled, &config.gmm_config())
        .context("cannot fit the correlation mixture")?
        .gmm;
    let result = hmm_postprocess(&corrs, &gmm, &config.window_transition()?)?;
    let centers = corrs.centers_s();

    create_dir(out)?;
    write_json(&out.join("gmm.json"), &gmm)?;
    save_posteriors(&result.posteriors, &centers, &out.join("posteriors.csv"))?;
    save_states(&result.decoded, centers[0], &out.join("decoded.csv"))?;

    let mut line = format!(
        "{}: {} windows, attended mean {:.4}, unattended mean {:.4}",
        paths.name,
        corrs.len(),
        gmm.mean_att,
        gmm.mean_unatt
    );
    if let Some(truth) = &rec.truth {
        let truth = window_majority(truth, &corrs)?;
        let report = evaluate(
            &result.posteriors,
            &result.decoded,
            &truth,
            corrs.rate_hz(),
            config.min_hold_samples,
            serde_json::to_value(config)?,
        )?;
        save_report(&report, &out.join("report.json"))?;
        line.push_str(&report_summary(&report));
    }
    Ok(line)
}

/// Window-rate truth: the majority state of each window, or its first
/// sample's state on a tie.
fn window_majority(truth: &StateSequence, corrs: &WindowedCorrelations) -> Result<StateSequence> {
    let n = corrs.window_len_samples;
    let states = (0..corrs.len())
        .map(|w| {
            let start = corrs.t_offset + w * n;
            let span = &truth.states[start..start + n];
            let ones = span.iter().filter(|s| **s == State::One).count();
            match (2 * ones).cmp(&n) {
                std::cmp::Ordering::Greater => State::One,
                std::cmp::Ordering::Less => State::Two,
                std::cmp::Ordering::Equal => span[0],
            }
        })
        .collect();
    Ok(StateSequence::new(states, corrs.rate_hz())?)
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Posterior CSV written by `fit` or `hmm`.
    #[arg(long, value_name = "FILE", required_unless_present = "decoded")]
    pub posteriors: Option<PathBuf>,
    /// Decoded state CSV. Scored instead of the posterior argmax when given.
    #[arg(long, value_name = "FILE")]
    pub decoded: Option<PathBuf>,
    /// Ground-truth states at the rate of the predictions (`--fs`).
    #[arg(long, value_name = "FILE")]
    pub truth: PathBuf,
    /// Truth entries to skip so that the first one lines up with the first prediction.
    #[arg(long, default_value_t = 0)]
    pub truth_offset: usize,
    /// Output report JSON.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

pub fn eval(args: &EvalArgs) -> Result<()> {
    let config = args.config.resolve(Rate::Sample)?;
    let fs = config.fs_hz;
    let posteriors = match &args.posteriors {
        Some(p) => Some(named(p, load_posteriors(p))?.1),
        None => None,
    };
    let decoded = match (&args.decoded, &posteriors) {
        (Some(p), _) => named(p, load_states(p, fs))?,
        (None, Some(post)) => decode(post, post.smoothed.is_some(), fs)?,
        (None, None) => unreachable!("clap requires --posteriors or --decoded"),
    };
    let posteriors = posteriors.unwrap_or_else(|| PosteriorSequence::one_hot(&decoded));
    if posteriors.len() != decoded.len() {
        bail!(Error::Dimension(format!(
            "{} posterior rows but {} decoded states",
            posteriors.len(),
            decoded.len()
        )));
    }
    let truth = named(&args.truth, load_states(&args.truth, fs))?;
    if truth.len() != args.truth_offset + decoded.len() {
        bail!(Error::Dimension(format!(
            "{} truth states after an offset of {} do not match {} predictions",
            truth.len().saturating_sub(args.truth_offset),
            args.truth_offset,
            decoded.len()
        )));
    }
    let truth = truth.slice(args.truth_offset, decoded.len())?;
    let report = evaluate(&posteriors, &decoded, &truth, fs, config.min_hold_samples, serde_json::to_value(&config)?)?;
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    save_report(&report, &args.out)?;
    println!("{}", report_summary(&report).trim_start_matches(", "));
    Ok(())
}

fn report_summary(report: &msm_core::eval::EvalReport) -> String {
    let mut s = format!(", accuracy {:.4}", report.accuracy);
    match report.mean_switch_time_s {
        Some(mean) => s.push_str(&format!(
            ", mean switch time {mean:.2} s over {} switches ({} missed)",
            report.n_true_switches, report.missed_switches
        )),
        None => s.push_str(", no true switches"),
    }
    s
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.to_path_buf(), source: e })?;
    Ok(())
}

/// Runs `work` on every recording with up to `jobs` threads and prints the
/// per-recording summaries in input order.
fn run_all<F>(paths: &[RecordingPaths], out: &Path, jobs: usize, work: F) -> Result<()>
where
    F: Fn(&RecordingPaths, &Path) -> Result<String> + Sync,
{
    if jobs == 0 {
        bail!(Error::InvalidParameter("--jobs must be at least 1".into()));
    }
    let dirs: Vec<PathBuf> = match paths {
        [_] => vec![out.to_path_buf()],
        _ => paths.iter().map(|p| out.join(&p.name)).collect(),
    };
    let next = AtomicUsize::new(0);
    let results: Vec<Mutex<Option<Result<String>>>> = paths.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..jobs.min(paths.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= paths.len() {
                    break;
                }
                let result = work(&paths[i], &dirs[i]);
                *results[i].lock().expect("result slot") = Some(result);
            });
        }
    });

    let mut first_error = None;
    for (paths, slot) in paths.iter().zip(results) {
        match slot.into_inner().expect("result slot").expect("every recording ran") {
            Ok(line) => println!("{line}"),
            Err(err) => {
                let err = if dirs.len() > 1 { err.context(format!("recording {}", paths.name)) } else { err };
                match first_error {
                    None => first_error = Some(err),
                    Some(_) => eprintln!("error: {err:#}"),
                }
            }
        }
    }
    first_error.map_or(Ok(()), Err)
}
