//! `msm`: sample-level auditory attention decoding from the command line.
//!
//! A typical run simulates (or brings) a recording, pretrains a least-squares
//! decoder on attended envelopes, then fits the Markov switching model to
//! the test recording:
//!
//! ```text
//! msm simulate --spec spec.json --out rec
//! msm pretrain --recording rec --lags 2 --out rec/decoder.json
//! msm fit --recording rec --decoder rec/decoder.json --lags 2 --out rec/fit
//! msm hmm --recording rec --decoder rec/decoder.json --lags 2 --out rec/hmm
//! ```
//!
//! Exit status is 0 on success, 1 when a numerical routine fails and 2 for
//! usage, validation and I/O errors.

mod commands;
mod inputs;
mod options;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "msm", version, about = "Markov switching attention decoding")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic recording with known attention switches.
    Simulate(commands::SimulateArgs),
    /// Train a least-squares decoder on the attended envelope.
    Pretrain(commands::PretrainArgs),
    /// Fit the switching model with EM and decode attention per sample.
    Fit(commands::FitArgs),
    /// Window-correlation baseline: GMM emissions smoothed by an HMM.
    Hmm(commands::HmmArgs),
    /// Score decoded states or posteriors against ground truth.
    Eval(commands::EvalArgs),
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let numerical = err
        .chain()
        .filter_map(|e| e.downcast_ref::<msm_core::Error>())
        .any(msm_core::Error::is_numerical);
    if numerical {
        1
    } else {
        2
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(args) => commands::simulate(args),
        Command::Pretrain(args) => commands::pretrain(args),
        Command::Fit(args) => commands::fit(args),
        Command::Hmm(args) => commands::hmm(args),
        Command::Eval(args) => commands::eval(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
