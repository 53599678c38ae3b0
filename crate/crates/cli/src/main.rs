mod args;
mod commands;
mod manifest;
mod problem;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command, FormatArg};
use problem::{Failure, EXIT_USAGE};

/// Flags shared by every subcommand.
pub struct Globals {
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub format: FormatArg,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE as u8 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code as u8)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(Failure::usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Failure::usage(e.to_string()))?;
    }
    let globals = Globals {
        seed: cli.seed,
        output: cli.output,
        format: cli.format,
    };
    match cli.command {
        Command::Select(args) => commands::select::run(&globals, args),
        Command::Benchmark(args) => commands::benchmark::run(&globals, args),
        Command::Diagnose(args) => commands::diagnose::run(&globals, args),
    }
}
