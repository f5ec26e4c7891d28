//! Command-line front end for `satindex-core`.
//!
//! Every command prints a JSON envelope `{command, config, status, result}`
//! and exits 0 on success, 1 when a check fails and 2 on usage or parse
//! errors.

pub mod args;
pub mod commands;
pub mod output;
pub mod reproduce;

use std::ffi::OsString;

use clap::Parser;

use args::{Cli, Command};
use output::EXIT_USAGE;

/// Parses `argv` and runs the selected command, returning the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = match &cli.command {
        Command::Validate(a) => commands::validate(a),
        Command::Equilibria(a) => commands::equilibria(a),
        Command::Degree(a) => commands::degree(a),
        Command::Fate(a) => commands::fate(a),
        Command::Scan(a) => commands::scan(a),
        Command::Convexity(a) => commands::convexity(a),
        Command::ReproducePaper(a) => reproduce::run(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}
