//! Command-line front end: parses a subcommand, runs it and writes a JSON report.
//!
//! Exit codes: 0 when every check passes or is inconclusive, 1 when a check fails,
//! 2 on a usage error, 3 when the library reports an error.

pub mod args;
pub mod commands;

use std::ffi::OsString;
use std::io::Write;
use std::time::Instant;

use clap::Parser;
use serde::Serialize;
use serde_json::Value;

use dimprofile::report::any_failed;
use dimprofile::Check;

use args::{Cli, Command, Format};

/// Bumped whenever a report field changes meaning or disappears.
pub const SCHEMA_VERSION: u32 = 1;

pub const EXIT_OK: u8 = 0;
pub const EXIT_CHECK_FAILED: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_RUNTIME: u8 = 3;

#[derive(Debug, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub subcommand: String,
    pub config: Value,
    pub results: Value,
    pub checks: Vec<Check>,
    pub timing_ms: u64,
}

fn subcommand_name(cmd: &Command) -> &'static str {
    match cmd {
        Command::Gen(_) => "gen",
        Command::Capacity(_) => "capacity",
        Command::Boxdim(_) => "boxdim",
        Command::Profile(_) => "profile",
        Command::Verify(_) => "verify",
        Command::Project(_) => "project",
        Command::Fbm(_) => "fbm",
        Command::Holder(_) => "holder",
        Command::Sandwich(_) => "sandwich",
    }
}

fn has_table(cmd: &Command) -> bool {
    matches!(cmd, Command::Profile(_) | Command::Verify(_) | Command::Sandwich(_))
}

/// Config echo: the parsed flags with defaults filled in, plus values resolved at run time.
fn config_echo(cli: &Cli, resolved: Value) -> Value {
    let mut config = serde_json::to_value(&cli.command).expect("serializable arguments");
    if let Value::Object(map) = &mut config {
        if let Some((_, flags)) = map.iter_mut().next() {
            if let Value::Object(flags) = flags {
                flags.insert("format".into(), serde_json::to_value(cli.format).expect("format"));
                if !resolved.is_null() {
                    flags.insert("resolved".into(), resolved);
                }
            }
        }
    }
    config
}

fn unique_names(checks: &[Check]) -> bool {
    let mut names: Vec<&str> = checks.iter().map(|c| c.name.as_str()).collect();
    names.sort_unstable();
    names.windows(2).all(|w| w[0] != w[1])
}

fn emit(cli: &Cli, text: &str) -> std::io::Result<()> {
    match &cli.report {
        Some(path) => std::fs::write(path, text),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()
        }
    }
}

/// Runs one invocation and returns the process exit code.
pub fn run<I, T>(argv: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    if cli.format == Format::Csv && !has_table(&cli.command) {
        eprintln!(
            "error: --format csv is only available for profile, verify and sandwich, not {}",
            subcommand_name(&cli.command)
        );
        return EXIT_USAGE;
    }

    let start = Instant::now();
    let outcome = match commands::execute(&cli.command) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("{e}");
            return EXIT_RUNTIME;
        }
    };
    let timing_ms = start.elapsed().as_millis() as u64;
    debug_assert!(unique_names(&outcome.checks), "duplicate check names");
    let failed = any_failed(&outcome.checks);

    let text = match (cli.format, &outcome.table) {
        (Format::Csv, Some(table)) => table.clone(),
        _ => {
            let report = Report {
                schema_version: SCHEMA_VERSION,
                subcommand: subcommand_name(&cli.command).to_string(),
                config: config_echo(&cli, outcome.resolved),
                results: outcome.results,
                checks: outcome.checks,
                timing_ms,
            };
            let mut s = serde_json::to_string_pretty(&report).expect("serializable report");
            s.push('\n');
            s
        }
    };
    if let Err(e) = emit(&cli, &text) {
        eprintln!("io error: {e}");
        return EXIT_RUNTIME;
    }
    if failed {
        EXIT_CHECK_FAILED
    } else {
        EXIT_OK
    }
}
