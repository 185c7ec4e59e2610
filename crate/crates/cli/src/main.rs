//! `tomtrack` command-line tool. One tract per invocation.
//!
//! Exit status: 0 on success, 1 on usage errors, 2 on data errors.

mod args;
mod commands;
mod config;
mod error;
mod output;

use std::ffi::OsString;

use clap::Parser;

use args::Cli;
use error::{CliError, CliResult, EXIT_USAGE};

const THREADS_ENV: &str = "TOMTRACK_THREADS";

fn thread_cap(flag: Option<usize>) -> CliResult<Option<usize>> {
    let n = match flag {
        Some(n) => Some(n),
        None => match std::env::var(THREADS_ENV) {
            Ok(v) => Some(v.trim().parse::<usize>().map_err(|_| {
                CliError::usage("E_BAD_THREADS", format!("{THREADS_ENV}=`{v}` is not a thread count"))
            })?),
            Err(_) => None,
        },
    };
    if n == Some(0) {
        return Err(CliError::usage("E_BAD_THREADS", "thread count must be at least 1"));
    }
    Ok(n)
}

#[cfg(feature = "parallel")]
fn run_with_threads(threads: Option<usize>, command: args::Command) -> CliResult<()> {
    match threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::usage("E_BAD_THREADS", e.to_string()))?;
            pool.install(|| commands::run(command))
        }
        None => commands::run(command),
    }
}

#[cfg(not(feature = "parallel"))]
fn run_with_threads(_threads: Option<usize>, command: args::Command) -> CliResult<()> {
    commands::run(command)
}

fn real_main(raw: Vec<OsString>) -> i32 {
    let expanded = match config::expand_args(raw) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("{e}");
            return e.exit;
        }
    };
    let cli = match Cli::try_parse_from(expanded) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    let result = thread_cap(cli.threads).and_then(|t| run_with_threads(t, cli.command));
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit
        }
    }
}

fn main() {
    std::process::exit(real_main(std::env::args_os().collect()));
}
