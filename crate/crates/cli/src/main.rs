// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod args;
mod commands;
mod output;

use std::ffi::OsString;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{CommandFactory, Parser};
use log::info;
use rand::Rng;

use args::{Cli, Command};
use output::Header;

#[derive(Debug)]
pub enum CliError {
    /// Bad input; exit code 2.
    Validation(String),
    /// Anything that fails while running; exit code 1.
    Runtime(String),
}

impl From<tlcp_core::Error> for CliError {
    fn from(e: tlcp_core::Error) -> Self {
        use tlcp_core::Error as E;
        match e {
            E::WindowMismatch | E::InvalidMark(_) => CliError::Runtime(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

/// Inserts `--key value` pairs from a `--config` file right after the
/// subcommand, so flags given on the command line override them.
fn expand_config(argv: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let strs: Vec<String> = argv
        .iter()
        .map(|a| a.to_string_lossy().into_owned())
        .collect();
    let mut path = None;
    for (i, a) in strs.iter().enumerate() {
        if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        } else if a == "--config" {
            path = strs.get(i + 1).cloned();
        }
    }
    let Some(path) = path else { return Ok(argv) };
    let text = std::fs::read_to_string(&path)
        .map_err(|e| CliError::Validation(format!("--config {path}: {e}")))?;
    let mut injected = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            CliError::Validation(format!("--config {path}:{}: expected key=value", n + 1))
        })?;
        let (k, v) = (k.trim(), v.trim());
        match v {
            "true" => injected.push(format!("--{k}")),
            "false" => {}
            _ => {
                injected.push(format!("--{k}"));
                injected.push(v.to_string());
            }
        }
    }
    // position of the subcommand: first argument after the program name
    // that does not start with '-'
    let at = strs
        .iter()
        .skip(1)
        .position(|a| !a.starts_with('-'))
        .map_or(argv.len(), |p| p + 2);
    let mut out = argv;
    let tail = out.split_off(at.min(out.len()));
    out.extend(injected.into_iter().map(OsString::from));
    out.extend(tail);
    Ok(out)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cmd = &cli.command;
    let common = cmd.common();
    if let Some(n) = common.threads {
        if n == 0 {
            return Err(CliError::Validation("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    let seed_optional = matches!(cmd, Command::OracleCheck(a) if a.reps == 0);
    let seed = match common.seed.as_deref() {
        Some("auto") => {
            let s: u64 = rand::rng().random();
            eprintln!("seed={s}");
            Some(s)
        }
        Some(s) => Some(
            s.parse::<u64>()
                .map_err(|_| CliError::Validation(format!("invalid --seed {s:?}")))?,
        ),
        None if seed_optional => None,
        None => Cli::command()
            .error(
                ErrorKind::MissingRequiredArgument,
                "the following required arguments were not provided:\n  --seed <SEED>",
            )
            .exit(),
    };
    let header = Header::new(cmd.name(), seed, cmd.config());
    let s = seed.unwrap_or(0);
    let report = match cmd {
        Command::Simulate(a) => commands::simulate(a, s, header),
        Command::DualCheck(a) => commands::dual_check(a, s, header),
        Command::BlockEstimate(a) => commands::block_estimate(a, s, header),
        Command::OpCompare(a) => commands::op_compare(a, s, header),
        Command::OracleCheck(a) => commands::oracle_check(a, seed, header),
        Command::Converge(a) => commands::converge(a, s, header),
        Command::Scan(a) => commands::scan(a, s, header),
    }?;
    let mut out = output::open(common.out.as_deref())?;
    report.write(common.format, &mut out)?;
    info!("done");
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let argv = match expand_config(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => return report_error(e),
    };
    let cli = Cli::parse_from(argv);
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report_error(e),
    }
}

fn report_error(e: CliError) -> ExitCode {
    match e {
        CliError::Validation(m) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        CliError::Runtime(m) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
