mod logs;
mod maps;
mod sim;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use polsim_core::engine::{ConfigError, RunError};
use polsim_core::geomap::synth::SynthError;
use polsim_core::geomap::MapError;
use polsim_core::logio::ProcError;
use polsim_fleet::FleetError;

/// Needs-driven human mobility simulator.
#[derive(Debug, Parser)]
#[command(name = "polsim", version, about, propagate_version = true)]
struct Cli {
    /// Seed for commands that take one; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Only print warnings and errors.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build a map file from GeoJSON buildings, units and walkways.
    Ingest(maps::IngestArgs),
    /// Check a map file and print its validation report.
    Validate(maps::ValidateArgs),
    /// Write a synthetic grid city as three GeoJSON layers.
    SynthMap(maps::SynthArgs),
    /// Run one simulation.
    Run(sim::RunArgs),
    /// Time runs over agent counts and optimization modes.
    Bench(sim::BenchArgs),
    /// Run many simulations from a manifest as child processes.
    Sweep(sim::SweepArgs),
    /// Merge, split, thin, summarize or export log files.
    #[command(subcommand)]
    Logs(logs::LogsCommand),
}

/// Bad invocation or input that is the user's to fix (exit 2).
#[derive(Debug)]
pub struct Usage(pub String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

/// Work finished but not everything succeeded (exit 4).
#[derive(Debug)]
pub struct Incomplete(pub String);

impl fmt::Display for Incomplete {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Incomplete {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

/// 2 for configuration and invocation errors, 3 for map errors, 4 for
/// everything that went wrong while running.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<Usage>() || cause.is::<ConfigError>() || cause.is::<SynthError>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<RunError>() {
            return match e {
                RunError::Config(_) => 2,
                RunError::Init(_) => 3,
                RunError::Io { .. } => 4,
            };
        }
        if cause.is::<MapError>() {
            return 3;
        }
        if let Some(e) = cause.downcast_ref::<FleetError>() {
            return match e {
                FleetError::Manifest { .. } => 2,
                _ => 4,
            };
        }
        if let Some(ProcError::Invalid(_)) = cause.downcast_ref::<ProcError>() {
            return 2;
        }
    }
    4
}

/// Writes `<path>.partial` and renames it into place.
pub fn write_atomic(path: &Path, text: &str) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, text).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming {} to {}", tmp.display(), path.display()))
}

/// Fails with a usage error naming `flag` when `path` does not exist.
pub fn require_file(flag: &str, path: &Path) -> anyhow::Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(usage(format!("{flag}: no such file: {}", path.display())))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(if cli.quiet { log::LevelFilter::Warn } else { log::LevelFilter::Info })
        .parse_default_env()
        .format_timestamp(None)
        .format_target(false)
        .init();
    let result = match cli.command {
        Command::Ingest(a) => maps::ingest(a, cli.seed),
        Command::Validate(a) => maps::validate(a),
        Command::SynthMap(a) => maps::synth(a, cli.seed),
        Command::Run(a) => sim::run(a, cli.seed),
        Command::Bench(a) => sim::bench(a, cli.seed),
        Command::Sweep(a) => sim::sweep(a),
        Command::Logs(c) => logs::dispatch(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("polsim: error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
