mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::FileConfig;

/// Execution-grounded text-to-SQL data and evaluation pipelines.
#[derive(Debug, Parser)]
#[command(name = "sqlforge", version)]
pub struct Cli {
    /// TOML config file; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Log filter for standard error (error, warn, info, debug, trace).
    #[arg(long, global = true, value_name = "LEVEL")]
    pub log_level: Option<String>,
    /// Print a machine-readable JSON summary instead of text.
    #[arg(long, global = true)]
    pub json: bool,
    /// Worker threads for eval, mine and refine [default: CPU count, at most 8].
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    pub jobs: Option<u16>,
    /// Seed for randomized steps [default: 0].
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Per-query execution budget in seconds [default: 30].
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    pub exec_timeout_secs: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Dump the schema of every database in a corpus as JSON lines.
    Introspect(IntrospectArgs),
    /// Build SFT records with Cross-DB or Inner-DB schema augmentation.
    Augment(AugmentArgs),
    /// Mine chosen/rejected preference pairs by execution agreement.
    Mine(MineArgs),
    /// Generate SQL and repair invalid queries with a debugger model.
    Refine(RefineArgs),
    /// Score predictions with execution accuracy and test-suite accuracy.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct IntrospectArgs {
    /// Corpus root containing database/<db_id>/<db_id>.sqlite.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Only these databases (repeatable).
    #[arg(long = "db", value_name = "DB_ID")]
    pub dbs: Vec<String>,
    /// Distinct sample values to collect per column.
    #[arg(long, default_value_t = 0)]
    pub sample_values: usize,
    /// Output file; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    CrossDb,
    InnerDb,
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    #[arg(long)]
    pub samples: PathBuf,
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub mode: ModeArg,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct MineArgs {
    #[arg(long)]
    pub samples: PathBuf,
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Chat-completions URL.
    #[arg(long, conflicts_with = "mock")]
    pub endpoint: Option<String>,
    /// Mock script (JSON lines) instead of a live endpoint.
    #[arg(long)]
    pub mock: Option<PathBuf>,
    /// Candidates sampled per question [default: 8].
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub n_candidates: Option<u32>,
    /// Sampling temperature [default: 0.5].
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RefineArgs {
    #[arg(long)]
    pub samples: PathBuf,
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Generator endpoint: URL, mock:<path>, or mock script path.
    #[arg(long)]
    pub generator: Option<String>,
    /// Debugger endpoint: URL, mock:<path>, or mock script path.
    #[arg(long)]
    pub debugger: Option<String>,
    /// Attempt budget per question [default: 3].
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub max_iters: Option<u32>,
    /// Predictions output, consumable by `eval`.
    #[arg(long)]
    pub out: PathBuf,
    /// Directory for one JSON trace per sample.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub samples: PathBuf,
    /// Predictions as JSON lines of {"sample_id", "sql"}.
    #[arg(long)]
    pub preds: PathBuf,
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Variant databases for TS: <variants>/<db_id>/<k>.sqlite.
    #[arg(long)]
    pub variants: Option<PathBuf>,
    /// Write the full report (with per-sample verdicts) as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Row label in the summary table.
    #[arg(long, default_value = "predictions")]
    pub label: String,
    /// Compare result rows as sets instead of multisets.
    #[arg(long)]
    pub set_semantics: bool,
}

pub enum Failure {
    Usage(String),
    Pipeline(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Pipeline(e)
    }
}

fn report_failure(kind: &str, message: &str, json: bool) {
    if json {
        eprintln!("{}", serde_json::json!({ "error": kind, "message": message }));
    } else {
        eprintln!("error: {message}");
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let json = cli.json;
    let file = match cli.config.as_deref().map(FileConfig::load).transpose() {
        Ok(f) => f.unwrap_or_default(),
        Err(msg) => {
            report_failure("usage", &msg, json);
            return ExitCode::from(2);
        }
    };
    init_logging(cli.log_level.as_deref().or(file.log_level.as_deref()).unwrap_or("warn"));
    match commands::run(cli, file) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            report_failure("usage", &msg, json);
            ExitCode::from(2)
        }
        Err(Failure::Pipeline(e)) => {
            report_failure("pipeline", &format!("{e:#}"), json);
            ExitCode::from(1)
        }
    }
}

fn init_logging(level: &str) {
    let filter = tracing_subscriber::EnvFilter::try_new(level).unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("warn"));
    let _ = tracing_subscriber::fmt().with_env_filter(filter).with_writer(std::io::stderr).try_init();
}
