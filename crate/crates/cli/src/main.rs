use clap::Parser;
use omltune_cli::{execute, Cli, Command};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let interrupt = Arc::new(AtomicBool::new(false));
    if matches!(cli.command, Command::Run(_)) {
        let flag = interrupt.clone();
        let installed = ctrlc::set_handler(move || {
            if flag.swap(true, Ordering::Relaxed) {
                std::process::exit(130);
            }
            eprintln!("interrupt: stopping after the current trial (press again to abort)");
        });
        if let Err(e) = installed {
            log::warn!("no interrupt handler: {e}");
        }
    }

    match execute(cli, interrupt) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
