// SPDX-License-Identifier: MIT OR Apache-2.0

mod args;
mod commands;
mod error;
mod manifest;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use error::CliError;

fn run(cli: Cli) -> Result<(), CliError> {
    #[cfg(feature = "parallel")]
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()
            .map_err(|e| CliError::Config(format!("--jobs: {e}")))?;
    }
    let config = match &cli.config {
        Some(p) => Some(manifest::load_config(p, cli.command.name())?),
        None => None,
    };
    let config = config.as_ref();
    let seed = cli.seed;
    match cli.command {
        Command::Weightlens(mut o) => {
            o.seed = seed;
            commands::weightlens(&o, config)
        }
        Command::Circuitlens(mut o) => {
            o.seed = seed;
            commands::circuitlens(&o, config)
        }
        Command::Attribute(mut o) => {
            o.seed = seed;
            commands::attribute(&o, config)
        }
        Command::Ingest(mut o) => {
            o.seed = seed;
            commands::ingest(&o, config)
        }
        Command::Scan(mut o) => {
            o.seed = seed;
            commands::scan(&o, config)
        }
        Command::Fixture(mut o) => {
            o.seed = seed;
            commands::fixture(&o, config)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { error::EXIT_CONFIG } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
