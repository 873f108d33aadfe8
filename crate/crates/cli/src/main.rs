//! `upflip`: dataset generation, summaries, uplift benchmarks, imbalanced
//! classification comparisons and curve plotting.
//!
//! Exit status is 0 on success, 1 when an experiment fails and 2 on bad
//! input (flags, config, unreadable or malformed files).

mod commands;
mod config;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Experiment(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Experiment(_) => 1,
            CliError::Input(_) => 2,
        }
    }
}

#[derive(Parser)]
#[command(name = "upflip", version, about = "Class-flipping corrections for uplift modeling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Options shared by every subcommand.
#[derive(Args, Clone, Debug, Default)]
pub struct Common {
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override any setting; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output file (generate, curves) or directory (bench, classif).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the effective settings and exit.
    #[arg(long)]
    show_config: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic trial dataset and its true uplift.
    Generate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        p: Option<usize>,
        #[arg(long)]
        control_intercept: Option<f64>,
        #[arg(long)]
        control_coef: Option<f64>,
        #[arg(long)]
        uplift_intercept: Option<f64>,
        #[arg(long)]
        uplift_coef: Option<f64>,
        #[arg(long)]
        treatment_share: Option<f64>,
        /// True-uplift file (default: `<out>.tau.csv`).
        #[arg(long)]
        tau_out: Option<PathBuf>,
    },
    /// Print group shares, class rates, majorities and the flip factor.
    Summarize {
        #[command(flatten)]
        common: Common,
        input: Option<PathBuf>,
        /// generic, hillstrom, criteo or starbucks.
        #[arg(long)]
        schema: Option<String>,
    },
    /// Repeated-holdout grid over metamodels and learners.
    Bench {
        #[command(flatten)]
        common: Common,
        /// Trial CSV; a synthetic dataset is generated when absent.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        schema: Option<String>,
        #[arg(long)]
        reps: Option<usize>,
        /// Comma-separated, e.g. `CVT,StratifiedCVT,FlippedCVT`.
        #[arg(long)]
        metamodels: Option<String>,
        /// Comma-separated, e.g. `LR,DT_0.05,RF_100_0.01`.
        #[arg(long)]
        learners: Option<String>,
    },
    /// Stratified cross-validated AUROC under class-imbalance corrections.
    Classif {
        #[command(flatten)]
        common: Common,
        /// Labeled CSV with a `y` column; the artificial generator is used when absent.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        folds: Option<usize>,
        #[arg(long)]
        learners: Option<String>,
    },
    /// Overlay curve CSVs (`fraction,gain`) in one SVG.
    Curves {
        #[command(flatten)]
        common: Common,
        inputs: Vec<PathBuf>,
        #[arg(long)]
        title: Option<String>,
    },
}

fn opt<T: ToString>(key: &'static str, v: &Option<T>) -> Option<(&'static str, String)> {
    v.as_ref().map(|v| (key, v.to_string()))
}

fn path(key: &'static str, v: &Option<PathBuf>) -> Option<(&'static str, String)> {
    v.as_ref().map(|v| (key, v.display().to_string()))
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Generate {
            common,
            n,
            p,
            control_intercept,
            control_coef,
            uplift_intercept,
            uplift_coef,
            treatment_share,
            tau_out,
        } => {
            let flags = [
                opt("n", &n),
                opt("p", &p),
                opt("control_intercept", &control_intercept),
                opt("control_coef", &control_coef),
                opt("uplift_intercept", &uplift_intercept),
                opt("uplift_coef", &uplift_coef),
                opt("treatment_share", &treatment_share),
                path("tau_out", &tau_out),
            ];
            commands::generate(&common, &flags)
        }
        Command::Summarize { common, input, schema } => {
            commands::summarize(&common, &[path("input", &input), opt("schema", &schema)])
        }
        Command::Bench {
            common,
            input,
            schema,
            reps,
            metamodels,
            learners,
        } => {
            let flags = [
                path("input", &input),
                opt("schema", &schema),
                opt("reps", &reps),
                opt("metamodels", &metamodels),
                opt("learners", &learners),
            ];
            commands::bench(&common, &flags)
        }
        Command::Classif {
            common,
            input,
            reps,
            folds,
            learners,
        } => {
            let flags = [
                path("input", &input),
                opt("reps", &reps),
                opt("folds", &folds),
                opt("learners", &learners),
            ];
            commands::classif(&common, &flags)
        }
        Command::Curves { common, inputs, title } => commands::curves(&common, &inputs, title.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("upflip: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
