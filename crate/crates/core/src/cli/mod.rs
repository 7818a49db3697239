//! Command-line front end: `analytic`, `simulate`, `verify`, `compare` and
//! `enumerate`.
//!
//! Exit codes: 0 success, 1 verification failure, 2 configuration or input
//! error.

mod commands;
pub mod config;
pub mod report;

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};

use clap::{Parser, Subcommand};

pub use config::{CommandKind, FileConfig, Flags, HorizonRange, RunConfig};
pub use report::{format_significant, Cell, OutputFormat, Table};

pub const EXIT_OK: u8 = 0;
pub const EXIT_VERIFICATION_FAILED: u8 = 1;
pub const EXIT_CONFIG_ERROR: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "horizon", version, about = "Exposure-normalized risk, return and uncertainty of investment schedules")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed-form moments, exposure measures and per-period ratios.
    Analytic(Flags),
    /// Monte Carlo estimates with standard errors.
    Simulate(Flags),
    /// Check closed forms against simulation or exact enumeration.
    Verify(Flags),
    /// Exposure and risk table across schedules and horizons.
    Compare(Flags),
    /// Exact moments by enumerating every path of a discrete process.
    Enumerate(Flags),
}

impl Command {
    fn split(&self) -> (CommandKind, &Flags) {
        match self {
            Command::Analytic(f) => (CommandKind::Analytic, f),
            Command::Simulate(f) => (CommandKind::Simulate, f),
            Command::Verify(f) => (CommandKind::Verify, f),
            Command::Compare(f) => (CommandKind::Compare, f),
            Command::Enumerate(f) => (CommandKind::Enumerate, f),
        }
    }
}

/// Result of one command: the report and whether every check passed.
pub struct Outcome {
    pub table: Table,
    pub passed: bool,
}

/// Runs a resolved configuration and returns its report.
pub fn execute(config: &RunConfig) -> crate::Result<Outcome> {
    match config.command {
        CommandKind::Analytic => commands::analytic(config),
        CommandKind::Simulate => commands::simulate(config),
        CommandKind::Verify => commands::verify(config),
        CommandKind::Compare => commands::compare(config),
        CommandKind::Enumerate => commands::enumerate(config),
    }
}

/// Parses `args`, runs the command and writes the report to `--out` or
/// `stdout`. Diagnostics go to `stderr`. Returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG_ERROR } else { EXIT_OK };
            let target: &mut dyn Write = if e.use_stderr() { stderr } else { stdout };
            let _ = write!(target, "{}", e.render());
            return code;
        }
    };
    let (kind, flags) = cli.command.split();
    let config = match RunConfig::resolve(kind, flags) {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return EXIT_CONFIG_ERROR;
        }
    };
    let outcome = match execute(&config) {
        Ok(o) => o,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return EXIT_CONFIG_ERROR;
        }
    };
    let written = match &config.out {
        Some(path) => File::create(path).map_err(crate::Error::from).and_then(|f| {
            outcome
                .table
                .write(config.output, &config.to_json(), config.rational, BufWriter::new(f))
        }),
        None => outcome
            .table
            .write(config.output, &config.to_json(), config.rational, &mut *stdout),
    };
    if let Err(e) = written {
        let _ = writeln!(stderr, "error: {e}");
        return EXIT_CONFIG_ERROR;
    }
    if outcome.passed {
        EXIT_OK
    } else {
        EXIT_VERIFICATION_FAILED
    }
}
