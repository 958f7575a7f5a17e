//! Command-line front end. `main` only parses arguments and maps the
//! outcome to an exit code; everything else lives here so tests can drive it.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod run;

use clap::Parser;

pub use error::{CliError, CliResult, ExitCode};

/// Parses `argv`, runs the subcommand and returns the process exit code.
pub fn main_with<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match args::Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::Validation as i32 } else { 0 };
        }
    };
    match commands::dispatch(cli.command) {
        Ok(()) => ExitCode::Success as i32,
        Err(e) => {
            eprintln!("error: {e}");
            e.code as i32
        }
    }
}
