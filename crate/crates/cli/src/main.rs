//! `session-miner`: synthesize, extract, train, evaluate, rank, predict.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or validation error.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

#[derive(Debug, Parser)]
#[command(name = "session-miner", version, about = "Search-session intent and knowledge-gain classification")]
struct Cli {
    /// Worker threads for data-parallel stages (default: available parallelism).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a labeled synthetic corpus (event log, labels, knowledge scores).
    Synth(SynthArgs),
    /// Extract a feature matrix from an event log.
    Extract(ExtractArgs),
    /// Train a model, optionally selecting hyperparameters by grid search.
    Train(TrainArgs),
    /// Evaluate one or more models on a labeled feature matrix.
    Evaluate(EvaluateArgs),
    /// Rank features by information gain.
    Rank(RankArgs),
    /// Predict per-session class scores.
    Predict(PredictArgs),
    /// Knowledge-state and knowledge-gain classification by cross-validation.
    Knowledge(KnowledgeArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output directory; receives events.log, labels.tsv, knowledge.tsv.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: u64,
    /// TOML configuration; omitted keys take their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the configured session count.
    #[arg(long)]
    pub sessions: Option<usize>,
    /// Use profiles that differ only in browsing behavior.
    #[arg(long)]
    pub browsing_only: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Sessions {
    /// Group by each event's `sid`.
    Field,
    /// Split each user's events at inactivity gaps.
    Gap,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[arg(long)]
    pub log: PathBuf,
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long, default_value = "intent-v1")]
    pub catalog: String,
    #[arg(long, value_enum, default_value = "field")]
    pub sessions: Sessions,
    /// Inactivity gap for `--sessions gap`.
    #[arg(long, default_value_t = 30)]
    pub gap_minutes: u64,
    /// Inter-event gap counted as a break.
    #[arg(long, default_value_t = 60)]
    pub break_seconds: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub features: PathBuf,
    /// DT, RF, LR, SVM, NB or MP.
    #[arg(long)]
    pub family: String,
    /// `default` for the built-in grid, or a JSON file holding an array of cells.
    #[arg(long, conflicts_with = "hyperparams")]
    pub grid: Option<String>,
    /// One JSON hyperparameter object, e.g. '{"max_depth":5}'.
    #[arg(long)]
    pub hyperparams: Option<String>,
    #[arg(long, default_value_t = 5)]
    pub k_folds: usize,
    /// accuracy or weighted-f1.
    #[arg(long, default_value = "accuracy")]
    pub metric: String,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long = "model", required = true)]
    pub models: Vec<PathBuf>,
    #[arg(long)]
    pub features: PathBuf,
    /// Also write the JSON report here.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, required_unless_present = "log", conflicts_with = "log")]
    pub features: Option<PathBuf>,
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "field")]
    pub sessions: Sessions,
    #[arg(long, default_value_t = 30)]
    pub gap_minutes: u64,
    #[arg(long, default_value_t = 60)]
    pub break_seconds: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Policy {
    Tertile,
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Selection {
    None,
    IgTopK,
    GreedyForward,
}

#[derive(Debug, Args)]
pub struct KnowledgeArgs {
    /// knowledge-v1 feature matrix.
    #[arg(long)]
    pub features: PathBuf,
    /// Knowledge file with pre/post scores.
    #[arg(long)]
    pub knowledge: PathBuf,
    #[arg(long, value_enum, default_value = "tertile")]
    pub policy: Policy,
    /// Fixed-policy state cuts `t1,t2`.
    #[arg(long, default_value = "0.4,0.7")]
    pub state_cuts: String,
    /// Fixed-policy gain cuts `t1,t2`.
    #[arg(long, default_value = "0.05,0.25")]
    pub gain_cuts: String,
    #[arg(long, default_value = "RF")]
    pub family: String,
    #[arg(long)]
    pub hyperparams: Option<String>,
    #[arg(long, value_enum, default_value = "none")]
    pub select: Selection,
    #[arg(long, default_value_t = 10)]
    pub budget: usize,
    #[arg(long, default_value_t = 5)]
    pub k_folds: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) | CliError::Io { .. } => 2,
        }
    }
}

macro_rules! data_errors {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Data(e.to_string())
            }
        }
    )*};
}

data_errors!(
    session_miner::Error,
    session_miner::ingest::IngestError,
    session_miner::features::FeatureError,
    session_miner::classifiers::ClassifierError,
    session_miner::eval::EvalError,
    session_miner::knowledge::KnowledgeError,
    session_miner::synth::SynthError
);

fn run(cli: Cli) -> Result<(), CliError> {
    let jobs = cli.jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, usize::from));
    if jobs == 0 {
        return Err(CliError::Usage("--jobs must be at least 1".into()));
    }
    let dispatch = move || match cli.command {
        Command::Synth(a) => commands::synth(&a, jobs),
        Command::Extract(a) => commands::extract(&a, jobs),
        Command::Train(a) => commands::train(&a, jobs),
        Command::Evaluate(a) => commands::evaluate(&a, jobs),
        Command::Rank(a) => commands::rank(&a, jobs),
        Command::Predict(a) => commands::predict(&a, jobs),
        Command::Knowledge(a) => commands::knowledge(&a, jobs),
    };
    #[cfg(feature = "rayon")]
    {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| CliError::Usage(format!("cannot start {jobs} workers: {e}")))?;
        pool.install(dispatch)
    }
    #[cfg(not(feature = "rayon"))]
    {
        if jobs > 1 {
            log::info!("built without the rayon feature; running sequentially");
        }
        dispatch()
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SESSION_MINER_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
