//! Binary front end: parses the command line, sizes the thread pool, and
//! maps experiment results to the exit code contract (0 pass, 2 threshold
//! failure, 1 runtime error).

use std::process::ExitCode;

use clap::Parser;

use porofem::cli::{self, Cli, Outcome};

fn main() -> ExitCode {
    let args = Cli::parse();
    init_threads();
    let kind = args.command.kind();
    let result =
        cli::load_run(kind, args.command.args()).and_then(|cfg| cli::run_experiment(&cfg));
    match result {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::ThresholdFailure(message)) => {
            eprintln!("threshold failure: {message}");
            ExitCode::from(2)
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(1)
        }
    }
}

/// Sizes the global thread pool from `POROFEM_THREADS`. This is the only
/// place the environment is read; unset or invalid values fall back to the
/// pool default.
#[cfg(feature = "parallel")]
fn init_threads() {
    let Ok(value) = std::env::var("POROFEM_THREADS") else {
        return;
    };
    match value.parse::<usize>() {
        Ok(n) if n >= 1 => {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
        _ => eprintln!("ignoring POROFEM_THREADS={value}: expected a positive integer"),
    }
}

#[cfg(not(feature = "parallel"))]
fn init_threads() {}
