//! `specsurvey`: generate synthetic radio maps and run surveying experiments.
//!
//! Exit codes: 0 success, 1 numerical failure, 2 configuration error,
//! 3 estimator bridge error, 4 I/O error.

mod commands;
mod spec;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Bridge(String),
    Io(String),
    Other(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Other(_) => 1,
            CliError::Config(_) => 2,
            CliError::Bridge(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Bridge(m) => write!(f, "estimator bridge error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Other(m) => write!(f, "{m}"),
        }
    }
}

impl From<specsurvey::Error> for CliError {
    fn from(e: specsurvey::Error) -> Self {
        use specsurvey::Error as E;
        let msg = e.to_string();
        match e.root() {
            E::Bridge(_) => CliError::Bridge(msg),
            E::Io(_) | E::Csv(_) => CliError::Io(msg),
            E::InvalidParameter(_) | E::BlockedNode(_) | E::Format { .. } | E::TransmitterColocation => {
                CliError::Config(msg)
            }
            _ => CliError::Other(msg),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "specsurvey", version, about = "Active radio map construction experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write synthetic (or re-export imported) maps in the text map format.
    GenerateMaps(CommonArgs),
    /// Run Monte Carlo surveying campaigns and write per-run and aggregate CSVs.
    RunExperiment(CommonArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// JSON experiment description; a previous run's manifest.json works too.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// host:port of an external estimator; also read from SPECSURVEY_BRIDGE.
    #[arg(long, env = "SPECSURVEY_BRIDGE")]
    pub bridge_endpoint: Option<String>,
    /// Monte Carlo runs (number of maps for generate-maps).
    #[arg(long)]
    pub runs: Option<usize>,
    /// Worker threads; all cores by default.
    #[arg(long)]
    pub workers: Option<usize>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GenerateMaps(args) => commands::resolve(&args).and_then(|s| commands::generate_maps(&s)),
        Command::RunExperiment(args) => commands::resolve(&args).and_then(|s| commands::run_experiment(&s)),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("specsurvey: {e}");
            ExitCode::from(e.code())
        }
    }
}
