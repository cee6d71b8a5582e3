mod args;
mod commands;
mod config;
mod error;
mod manifest;

use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches};

use args::{Cli, Command};
use error::{CliError, CliResult};

fn run() -> CliResult<()> {
    let argv = config::merge_config(std::env::args_os().collect())?;
    let matches = match Cli::command().try_get_matches_from(argv) {
        Ok(m) => m,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let cli = Cli::from_arg_matches(&matches).map_err(|e| CliError::Usage(e.to_string()))?;
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n as usize)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot start {n} threads: {e}")))?;
    }
    let (_, sub) = matches.subcommand().expect("subcommand required");
    log::debug!("running {}", cli.command.name());
    match &cli.command {
        Command::Synth(a) => commands::synth(a, sub),
        Command::Ingest(a) => commands::ingest(a, sub),
        Command::Augment(a) => commands::augment(a, sub),
        Command::Featurize(a) => commands::featurize(a, sub),
        Command::Train(a) => commands::train(a, sub),
        Command::Eval(a) => commands::eval(a, sub),
        Command::Predict(a) => commands::predict(a, sub),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, CliError::Usage(_)) {
                eprintln!("run `rfdrone --help` for usage");
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
