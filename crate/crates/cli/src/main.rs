use std::process::ExitCode;

use clap::Parser;

use hsr_cli::{commands, Command, Globals};

/// Hierarchical sim-to-real laboratory: train low-level, high-level and flat
/// policies, evaluate them and export episode traces.
///
/// Settings are read from the config file, then from `HSR_*` environment
/// variables (`__` separates nested keys, e.g. `HSR_TRAIN__ITERATIONS=50`),
/// then from the flags below.
#[derive(Debug, Parser)]
#[command(name = "hsr", version = concat!(env!("CARGO_PKG_VERSION"), " (", env!("HSR_CODE_VERSION"), ")"))]
struct Cli {
    #[command(flatten)]
    globals: Globals,
    #[command(subcommand)]
    command: Command,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.globals.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: configuration error: cannot start {n} workers: {e}");
            return ExitCode::from(2);
        }
    }
    match commands::run(&cli.globals, &cli.command, std::env::vars()) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
