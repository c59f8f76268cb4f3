//! `suprahmm`: feature extraction, training, evaluation, classification,
//! synthetic corpora and significance tests from the command line.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use suprahmm_core::classify::BankKind;

#[derive(Debug, Parser)]
#[command(
    name = "suprahmm",
    version,
    about = "Circular suprasegmental HMM emotion recognition"
)]
struct Cli {
    /// Experiment config (JSON); flags override its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config and SUPRAHMM_SEED.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Extract MFCC and prosody features for every WAV in a manifest.
    Extract {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic labelled corpus.
    Synth {
        /// Synthetic spec (JSON); replaces the config's `synthetic` section.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train one model per emotion on the training part of a corpus.
    Train {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Classify the test part of a corpus and write accuracy reports.
    Evaluate {
        #[arg(long)]
        bank: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated fusion weights, one report each (CSPHMM3 banks).
        #[arg(long, value_delimiter = ',')]
        alpha_sweep: Option<Vec<f64>>,
    },
    /// Classify a single utterance.
    Classify {
        #[arg(long)]
        bank: PathBuf,
        /// 16-bit mono WAV; features are extracted with the config's settings.
        #[arg(long, conflicts_with = "features")]
        wav: Option<PathBuf>,
        /// Feature dump as written by `extract` or `synth`.
        #[arg(long, required_unless_present = "wav")]
        features: Option<PathBuf>,
        /// Prosody dump matching `--features`.
        #[arg(long, requires = "features")]
        prosody: Option<PathBuf>,
        /// Fingerprint of the dumped features (default: the config's MFCC settings).
        #[arg(long, requires = "features")]
        fingerprint: Option<String>,
    },
    /// Student's t test between two reports (or two explicit means).
    Ttest(TtestArgs),
    /// Render one or more report.json files as text tables.
    Report {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct ModelArgs {
    #[arg(long)]
    kind: Option<BankKind>,
    #[arg(long)]
    alpha: Option<f64>,
}

#[derive(Debug, Args)]
struct TtestArgs {
    #[arg(long, required_unless_present = "mean_a")]
    a: Option<PathBuf>,
    #[arg(long, required_unless_present = "mean_b")]
    b: Option<PathBuf>,
    #[arg(long, conflicts_with = "a")]
    mean_a: Option<f64>,
    #[arg(long, conflicts_with = "b")]
    mean_b: Option<f64>,
    /// Override the SD of sample A (default: SD of its per-emotion accuracies).
    #[arg(long)]
    sd_a: Option<f64>,
    #[arg(long)]
    sd_b: Option<f64>,
    /// Use this pooled SD directly.
    #[arg(long, conflicts_with_all = ["sd_a", "sd_b"])]
    sd_pooled: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {}", commands::describe(&err));
            ExitCode::from(commands::exit_code(&err))
        }
    }
}
