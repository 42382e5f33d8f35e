//! The `omltune` command line: inspect data, save, run and analyze
//! experiments, and launch the HTTP service.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 invalid input, 130 interrupted.

/// `println!` that ignores a closed stdout (e.g. piped into `head`).
macro_rules! emit {
    ($($t:tt)*) => {
        $crate::write_stdout(&format!($($t)*))
    };
}

mod data;
mod error;
mod experiment;
mod serve;

pub use error::CliError;

use clap::{Args, Parser, Subcommand};
use omltune::dataspace::DataRegistry;
use omltune::experiments::{ArtifactStore, DEFAULT_DIR, DIR_ENV};
use std::path::PathBuf;
use std::sync::atomic::AtomicBool;
use std::sync::Arc;

#[derive(Debug, Parser)]
#[command(name = "omltune", version, about = "Hyperparameter tuning for online machine learning")]
pub struct Cli {
    /// Experiment artifact directory.
    #[arg(long, global = true, env = DIR_ENV, default_value = DEFAULT_DIR)]
    pub dir: PathBuf,

    /// Directory scanned for user CSV datasets.
    #[arg(long = "data_dir", visible_alias = "data-dir", global = true, default_value = "userData")]
    pub data_dir: PathBuf,

    /// Log more (repeat for debug output).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Inspect datasets.
    #[command(subcommand)]
    Data(DataCommand),
    /// Validate experiment options and write a spec file.
    Save(experiment::SaveArgs),
    /// Run a spec to completion, printing one progress line per trial.
    Run(experiment::RunArgs),
    /// Print or export an analysis artifact of a stored experiment.
    Analyze(experiment::AnalyzeArgs),
    /// Start the HTTP service.
    Serve(serve::ServeArgs),
}

#[derive(Debug, Subcommand)]
pub enum DataCommand {
    /// List registered datasets.
    List(JsonFlag),
    /// Summary tables of the train and test partitions.
    Show(data::ShowArgs),
}

#[derive(Debug, Args)]
pub struct JsonFlag {
    /// Print JSON instead of a table.
    #[arg(long)]
    pub json: bool,
}

#[doc(hidden)]
pub fn write_stdout(line: &str) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes()).and_then(|()| out.write_all(b"\n"));
}

fn data_registry(cli: &Cli) -> Result<DataRegistry, CliError> {
    DataRegistry::with_user_dir(&cli.data_dir).map_err(|e| CliError::Runtime(e.to_string()))
}

/// Run a parsed command. `interrupt` is raised by the Ctrl-C handler.
pub fn execute(cli: Cli, interrupt: Arc<AtomicBool>) -> Result<(), CliError> {
    let data = data_registry(&cli)?;
    let store = ArtifactStore::new(&cli.dir);
    match &cli.command {
        Command::Data(DataCommand::List(flag)) => data::list(&data, flag.json),
        Command::Data(DataCommand::Show(args)) => data::show(&data, args),
        Command::Save(args) => experiment::save(&data, args),
        Command::Run(args) => experiment::run(&data, &store, args, &interrupt),
        Command::Analyze(args) => experiment::analyze(&store, args),
        Command::Serve(args) => serve::serve(data, &cli.dir, args),
    }
}
