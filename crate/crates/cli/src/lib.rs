//! Command-line front end of the perceptimetric toolkit.

mod args;
mod artifact;
mod commands;
mod metric_file;
mod report;

use std::ffi::OsString;

use clap::Parser;

pub use args::{Cli, Command};
pub use metric_file::{MetricOutput, OutputKind};

/// Runs the tool and returns the process exit code: 0 on success, 1 for bad
/// data, 2 for bad usage.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();

    if let Some(threads) = cli.threads {
        if threads == 0 {
            eprintln!("error: --threads must be at least 1");
            return 2;
        }
        if rayon::ThreadPoolBuilder::new().num_threads(threads).build_global().is_err() {
            log::debug!("thread pool already initialised");
        }
    }

    match commands::dispatch(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<artifact::UsageError>().is_some() {
                2
            } else {
                1
            }
        }
    }
}
