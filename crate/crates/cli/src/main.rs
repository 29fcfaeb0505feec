//! `chmm`: feature extraction, training, evaluation and synthetic corpora
//! for closed-set speaker identification experiments.
//!
//! Exit codes: 0 success, 1 hard failure, 2 nothing to do (empty input,
//! every trial skipped).

mod config;
mod evaluate;
mod features;
mod inspect;
mod store;
mod synth;
mod train;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{CliConfig, Overrides};

#[derive(Debug, Parser)]
#[command(
    name = "chmm",
    version,
    about = "Speaker identification with first- and second-order HMMs"
)]
struct Cli {
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Extract LPC cepstra from audio files or a manifest into feature caches.
    Features {
        /// Audio files (`.wav`, or headerless 16-bit PCM at the configured rate).
        inputs: Vec<PathBuf>,
        /// Convert every row of this manifest and write a new manifest.
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one model per (speaker, word) of the manifest's train split.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        /// Model store directory (default: `paths.models`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Identify the test split and write accuracy and improvement reports.
    Evaluate {
        #[arg(long, required_unless_present = "fixtures")]
        manifest: Option<PathBuf>,
        /// Build the report from an accuracy grid file instead of models.
        #[arg(long, conflicts_with = "manifest")]
        fixtures: Option<PathBuf>,
        /// Variant whose improvement over the others is reported.
        #[arg(long)]
        reference: Option<String>,
        /// Report directory (default: `paths.reports`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic corpus of feature caches and its manifest.
    Synth {
        /// TOML corpus description; defaults apply to missing fields.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print a model file in readable form.
    Inspect { model: PathBuf },
}

#[derive(Debug)]
pub enum CliError {
    Hard(String),
    NoWork(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Hard(m) | CliError::NoWork(m) => f.write_str(m),
        }
    }
}

impl From<chmm::Error> for CliError {
    fn from(e: chmm::Error) -> Self {
        CliError::Hard(e.to_string())
    }
}

impl CliError {
    fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Hard(_) => ExitCode::from(1),
            CliError::NoWork(_) => ExitCode::from(2),
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (config, variants) = CliConfig::resolve(&cli.overrides)?;
    match cli.command {
        Command::Features {
            inputs,
            manifest,
            out,
        } => features::run(&config, &inputs, manifest.as_deref(), &out),
        Command::Train { manifest, out } => {
            let store = out.unwrap_or_else(|| config.paths.models.clone());
            train::run(&config, variants, &manifest, &store)
        }
        Command::Evaluate {
            manifest,
            fixtures,
            reference,
            out,
        } => {
            let reports = out.unwrap_or_else(|| config.paths.reports.clone());
            let reference = reference.as_deref().map(str::parse).transpose()?;
            match (fixtures, manifest) {
                (Some(f), _) => evaluate::from_fixtures(&config, &f, reference, &reports),
                (None, Some(m)) => evaluate::run(&config, variants, &m, reference, &reports),
                (None, None) => Err(CliError::Hard(
                    "--manifest or --fixtures is required".into(),
                )),
            }
        }
        Command::Synth { spec, out } => synth::run(spec.as_deref(), cli.overrides.seed, &out),
        Command::Inspect { model } => inspect::run(&model),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
