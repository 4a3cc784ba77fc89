//! `tonebias` command-line interface.

mod commands;
mod config;

use std::path::Path;
use std::process::ExitCode;

use clap::{ColorChoice, CommandFactory, FromArgMatches, Parser, Subcommand};

use config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "tonebias", version, about = "Audit assistant responses for tonal skew")]
struct Cli {
    /// Bound the worker thread count.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, clap::Args)]
pub struct GenArgs {
    #[arg(long, default_value_t = 2000)]
    pub n: usize,
    #[arg(long, default_value_t = 0.5)]
    pub positive: f64,
    #[arg(long, default_value_t = 0.5)]
    pub negative: f64,
    #[arg(long, default_value_t = 0.0)]
    pub neutral: f64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long)]
    pub out: std::path::PathBuf,
}

#[derive(Debug, Clone, clap::Args)]
pub struct PipelineArgs {
    /// JSON run configuration; flags override its values.
    #[arg(long)]
    pub config: Option<std::path::PathBuf>,
    #[command(flatten)]
    pub run: RunConfig,
}

#[derive(Debug, Clone, clap::Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    /// One of mnb, logreg, svm, vote, stack.
    #[arg(long, default_value = "logreg")]
    pub model: String,
    /// One of tfidf, dense.
    #[arg(long, default_value = "tfidf")]
    pub encoding: String,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a seeded synthetic corpus.
    Generate(GenArgs),
    /// Write tone-conditioned prompts for collecting real responses.
    Promptpack(GenArgs),
    /// Validate a corpus and write its cleaned documents.
    Ingest(PipelineArgs),
    /// Score and label responses at one threshold.
    Label(PipelineArgs),
    /// Fit one model on every confidently labeled response.
    Train(TrainArgs),
    /// Evaluate models across thresholds.
    Sweep(PipelineArgs),
    /// Label, split, train, evaluate, measure skew and write the report.
    Audit(PipelineArgs),
}

#[derive(Debug)]
pub enum CliError {
    Core(tonebias::Error),
    Config(String),
    Usage(String),
    Io { path: String, source: std::io::Error },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.display().to_string(),
            source,
        }
    }

    fn code(&self) -> &'static str {
        match self {
            Self::Core(e) => e.code(),
            Self::Config(_) => "InvalidConfig",
            Self::Usage(_) => "Usage",
            Self::Io { .. } => "IoError",
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            Self::Core(e) if !e.is_validation() => 2,
            Self::Io { .. } => 2,
            _ => 1,
        }
    }

    fn detail(&self) -> String {
        match self {
            Self::Core(e) => e.to_string(),
            Self::Config(s) | Self::Usage(s) => s.clone(),
            Self::Io { path, source } => format!("{path}: {source}"),
        }
    }
}

macro_rules! from_core {
    ($($t:ty),*) => {
        $(impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Core(e.into())
            }
        })*
    };
}

from_core!(
    tonebias::Error,
    tonebias::corpus::CorpusError,
    tonebias::preprocess::PreprocessError,
    tonebias::weaklabel::LabelError,
    tonebias::features::FeatureError,
    tonebias::models::ModelError,
    tonebias::ensemble::EnsembleError,
    tonebias::eval::EvalError
);

fn run(cli: Cli) -> Result<(), CliError> {
    let jobs = cli.jobs;
    if jobs == Some(0) {
        return Err(CliError::Usage("--jobs must be at least 1".into()));
    }
    tonebias::par::with_jobs(jobs, move || match cli.command {
        Command::Generate(a) => commands::generate(&a),
        Command::Promptpack(a) => commands::promptpack(&a),
        Command::Ingest(a) => commands::ingest(&a),
        Command::Label(a) => commands::label(&a),
        Command::Train(a) => commands::train(&a),
        Command::Sweep(a) => commands::sweep(&a, false),
        Command::Audit(a) => commands::sweep(&a, true),
    })
}

fn main() -> ExitCode {
    let color = if std::env::var_os("NO_COLOR").is_some_and(|v| !v.is_empty()) {
        ColorChoice::Never
    } else {
        ColorChoice::Auto
    };
    let matches = match Cli::command().color(color).try_get_matches() {
        Ok(m) => m,
        Err(e) if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            eprintln!("ERROR Usage: {first}");
            return ExitCode::from(1);
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("ERROR Usage: {e}");
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ERROR {}: {}", e.code(), e.detail());
            ExitCode::from(e.exit_code())
        }
    }
}
