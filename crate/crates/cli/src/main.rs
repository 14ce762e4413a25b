//! `pulsebench`: synthetic clips, single-clip runs, training, benchmarks and
//! model cost tables. JSON goes to stdout, human-readable text to stderr.
//!
//! Exit codes: 0 ok, 1 runtime failure, 2 usage or configuration error.

mod commands;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Parser)]
#[command(
    name = "pulsebench",
    version,
    about = "rPPG engine and benchmark harness"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic clip corpus plus manifest.
    Synth {
        /// Corpus config (JSON); defaults apply to missing fields.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the number of clips.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Run one algorithm on one clip and print HR, SDNN and per-window estimates.
    Run {
        #[arg(long)]
        algo: String,
        #[arg(long)]
        clip: PathBuf,
        /// Weights file for neural algorithms.
        #[arg(long)]
        weights: Option<PathBuf>,
        /// Write an SVG of the waveforms and their Welch spectra.
        #[arg(long)]
        plot: Option<PathBuf>,
        #[arg(long, default_value_t = pulsebench_bench::evaluate::DEFAULT_WINDOW_S)]
        window_s: f64,
        #[arg(long, default_value_t = pulsebench_bench::evaluate::DEFAULT_STRIDE_S)]
        stride_s: f64,
    },
    /// Train a neural model; writes PBWT weights and a loss-curve CSV.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Loss CSV path; defaults to `<out>.loss.csv`.
        #[arg(long)]
        loss_csv: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Benchmark every configured algorithm and write the JSON report.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads; falls back to PULSEBENCH_THREADS, then the config.
        #[arg(long, env = "PULSEBENCH_THREADS")]
        threads: Option<usize>,
    },
    /// Parameter count and FLOPs per frame.
    Flops {
        /// `seq_rppg` or `noobheart`; all models when omitted.
        model: Option<String>,
    },
    /// Print a PBVC clip header as JSON.
    Inspect { clip: PathBuf },
    /// Scatter plot of predicted vs reference HR from a benchmark report.
    Plot {
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

/// An error tagged with the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn usage(error: impl Into<anyhow::Error>) -> Self {
        Self {
            code: 2,
            error: error.into(),
        }
    }

    pub fn runtime(error: impl Into<anyhow::Error>) -> Self {
        Self {
            code: 1,
            error: error.into(),
        }
    }
}

impl From<pulsebench_bench::Error> for Failure {
    fn from(e: pulsebench_bench::Error) -> Self {
        use pulsebench_bench::Error as B;
        use pulsebench_neural::Error as N;
        match e {
            B::Config(_) | B::Neural(N::Config(_) | N::UnknownModel(_)) => Failure::usage(e),
            _ => Failure::runtime(e),
        }
    }
}

impl From<pulsebench_neural::Error> for Failure {
    fn from(e: pulsebench_neural::Error) -> Self {
        pulsebench_bench::Error::from(e).into()
    }
}

impl From<pulsebench_core::Error> for Failure {
    fn from(e: pulsebench_core::Error) -> Self {
        Failure::runtime(e)
    }
}

pub type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Synth {
            config,
            out,
            seed,
            n,
        } => commands::synth(config, &out, seed, n),
        Command::Run {
            algo,
            clip,
            weights,
            plot,
            window_s,
            stride_s,
        } => commands::run(&algo, &clip, weights, plot, window_s, stride_s),
        Command::Train {
            config,
            out,
            loss_csv,
            seed,
            epochs,
        } => commands::train(config, &out, loss_csv, seed, epochs),
        Command::Bench {
            config,
            out,
            seed,
            threads,
        } => commands::bench(&config, &out, seed, threads),
        Command::Flops { model } => commands::flops(model.as_deref()),
        Command::Inspect { clip } => commands::inspect(&clip),
        Command::Plot { report, out } => commands::plot(&report, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
