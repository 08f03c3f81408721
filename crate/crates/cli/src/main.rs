//! Command-line front end for the claims-fraud toolkit.
//!
//! Verbs mirror the pipeline stages: `synth`, `prep`, `train`, `eval`,
//! `stats`, `score`, `retrain`. One JSON config drives everything; flags
//! and `FRAUDKIT_*` environment variables override it. Exit codes:
//! 0 success, 2 usage, 3 data error, 4 dependency error.

mod artifacts;
mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{Overrides, RunConfig};
use fraudkit_core::Error;

#[derive(Parser)]
#[command(name = "fraudkit", version, about = "Claims-fraud detection pipeline")]
struct Cli {
    /// Run configuration (JSON). Defaults apply when omitted.
    #[arg(long, global = true, env = "FRAUDKIT_CONFIG")]
    config: Option<PathBuf>,

    /// Output directory; overrides the config's out_dir.
    #[arg(long, global = true, env = "FRAUDKIT_OUT")]
    out: Option<PathBuf>,

    /// Master seed; overrides config seed plus split/resample/synth seeds.
    #[arg(long, global = true, env = "FRAUDKIT_SEED")]
    seed: Option<u64>,

    /// Abort on the first malformed row or orphan claim.
    #[arg(long, global = true, env = "FRAUDKIT_STRICT")]
    strict: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic tables with planted fraud patterns.
    Synth,
    /// Parse, join, split, and fit the feature transforms.
    Prep {
        /// Provider-disjoint split (claims follow their provider) instead
        /// of the default claim-level stratified split.
        #[arg(long)]
        split_by_provider: bool,
    },
    /// Resample the training split and fit the configured models.
    Train {
        /// Balancing operator: smote|smote-enn|ros|rus|none.
        #[arg(long)]
        resample: Option<String>,
        /// Neighbor count for SMOTE/ENN.
        #[arg(long)]
        k: Option<usize>,
        /// Target minority/majority ratio in (0, 1].
        #[arg(long)]
        ratio: Option<f64>,
    },
    /// Score trained models on both splits and write the report bundle.
    Eval,
    /// Descriptive statistics of the joined claims.
    Stats,
    /// Score claim tables with one persisted model.
    Score {
        /// Model document to apply.
        #[arg(long)]
        model: PathBuf,
        /// Output CSV (default <out>/scores.csv).
        #[arg(long)]
        scores_out: Option<PathBuf>,
    },
    /// Refit transforms and models on prior + new claims, with versioning.
    Retrain {
        /// Directory holding the new four-file table layout; omit to refit
        /// on the prior training claims alone.
        #[arg(long)]
        new_dir: Option<PathBuf>,
    },
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Usage(_) => 2,
        Error::MissingArtifact(_)
        | Error::VersionMismatch { .. }
        | Error::FingerprintMismatch { .. } => 4,
        Error::Strict(inner) => exit_code_for(inner),
        _ => 3,
    }
}

fn error_kind(err: &Error) -> &'static str {
    match err {
        Error::Usage(_) => "usage",
        Error::MissingColumn { .. } => "schema",
        Error::Row { .. } => "row",
        Error::Strict(inner) => error_kind(inner),
        Error::Data(_) => "data",
        Error::VersionMismatch { .. } => "version_mismatch",
        Error::FingerprintMismatch { .. } => "fingerprint_mismatch",
        Error::Corrupt { .. } => "corrupt",
        Error::MissingArtifact(_) => "missing_artifact",
        Error::Io { .. } => "io",
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    let overrides = Overrides { out: cli.out, seed: cli.seed, strict: cli.strict };
    let mut config = RunConfig::load(cli.config.as_deref(), &overrides)?;
    match cli.command {
        Command::Synth => commands::synth::run(&config),
        Command::Prep { split_by_provider } => {
            if split_by_provider {
                config.split.by_provider = true;
            }
            commands::prep::run(&config)
        }
        Command::Train { resample, k, ratio } => {
            if let Some(method) = resample {
                config.resample.method = fraudkit_core::resample::ResampleMethod::parse(&method)?;
            }
            if let Some(k) = k {
                config.resample.k_neighbors = k;
            }
            if let Some(ratio) = ratio {
                config.resample.target_ratio = ratio;
            }
            commands::train::run(&config)
        }
        Command::Eval => commands::eval::run(&config),
        Command::Stats => commands::stats::run(&config),
        Command::Score { model, scores_out } => {
            commands::score::run(&config, &model, scores_out.as_deref())
        }
        Command::Retrain { new_dir } => commands::retrain::run(&config, new_dir.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let code = exit_code_for(&err);
            let record = serde_json::json!({
                "error": error_kind(&err),
                "message": err.to_string(),
                "exit_code": code,
            });
            eprintln!("{record}");
            ExitCode::from(code)
        }
    }
}
