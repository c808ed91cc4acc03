//! Command-line front end: configuration, experiments, plots and the
//! verification suite.

use std::ffi::OsString;

use clap::error::ErrorKind;
use clap::Parser;

pub mod commands;
pub mod config;
pub mod plot;
pub mod report;
pub mod verify;

use config::{Cli, ExperimentConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Parses `argv` (program name first), runs the experiment and returns the
/// process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    let (kind, flags) = cli.command.split();
    let outcome = ExperimentConfig::resolve(kind, flags).and_then(|cfg| commands::execute(&cfg));
    match outcome {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_CHECK_FAILED,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_USAGE
        }
    }
}
