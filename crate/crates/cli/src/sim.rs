use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use clap::Args;
use polsim_core::engine::{self, format_bench, run_with, ConfigError, RunOptions, SimConfig, SUMMARY_FILE};
use polsim_core::geomap::WorldMap;
use polsim_core::needs::{PoiSelection, ReevalMode};
use polsim_fleet::{collect, JobState, Manifest, Mode, ProcessLauncher, SIM_BIN_ENV};

use crate::{require_file, usage, write_atomic, Incomplete};

pub const BENCH_FILE: &str = "bench.txt";

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Map file from `ingest` or `synth-map --map`.
    #[arg(long)]
    map: PathBuf,
    /// Config file; defaults apply to keys it omits.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; required unless the config sets `out`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Number of ticks, overriding the config.
    #[arg(long)]
    ticks: Option<u64>,
    /// Override a config key, e.g. `--set agents=200`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    map: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory for per-run output and `bench.txt`.
    #[arg(long)]
    out: PathBuf,
    /// Agent counts, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "1000")]
    agents: Vec<u32>,
    /// Modes as `reevaluation:poi_selection`, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "daily:euclidean,per_tick:network")]
    modes: Vec<String>,
    #[arg(long)]
    ticks: Option<u64>,
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Worker slots, overriding the manifest.
    #[arg(long)]
    workers: Option<usize>,
    /// `queue` or `forkjoin`, overriding the manifest.
    #[arg(long)]
    mode: Option<Mode>,
    /// Merge the logs of finished jobs into this directory.
    #[arg(long)]
    collect: Option<PathBuf>,
    /// Rerun jobs already marked done.
    #[arg(long)]
    force: bool,
}

fn load_config(path: Option<&Path>, seed: Option<u64>, ticks: Option<u64>, sets: &[String]) -> Result<SimConfig> {
    let mut cfg = match path {
        Some(p) => {
            require_file("--config", p)?;
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            SimConfig::parse(&text).with_context(|| format!("in {}", p.display()))?
        }
        None => SimConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(t) = ticks {
        cfg.ticks = t;
    }
    for s in sets {
        let (k, v) = s.split_once('=').ok_or_else(|| usage(format!("--set expects KEY=VALUE, got `{s}`")))?;
        cfg.set(k.trim(), v.trim()).map_err(|m| ConfigError::new(format!("--set {m}")))?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn load_map(path: &Path) -> Result<WorldMap> {
    require_file("--map", path)?;
    let map = WorldMap::load(path)?;
    Ok(map)
}

pub fn run(a: RunArgs, seed: Option<u64>) -> Result<()> {
    let cfg = load_config(a.config.as_deref(), seed, a.ticks, &a.sets)?;
    let out = a.out.or_else(|| cfg.out.clone()).ok_or_else(|| usage("--out is required unless the config sets `out`"))?;
    let t0 = Instant::now();
    let map = load_map(&a.map)?;
    log::info!("{} agents for {} ticks, seed {}", cfg.agents, cfg.ticks, cfg.seed);
    let s = run_with(&cfg, &map, &out, RunOptions { map_load: t0.elapsed() })?;
    log::info!(
        "done: init {:.2} s, sim {:.2} s, {} check-ins; summary in {}",
        s.init_seconds,
        s.sim_seconds,
        s.checkins,
        out.join(SUMMARY_FILE).display()
    );
    Ok(())
}

fn parse_mode(s: &str) -> Result<(ReevalMode, PoiSelection)> {
    let (r, p) = s.split_once(':').ok_or_else(|| usage(format!("--modes entries look like daily:euclidean, got `{s}`")))?;
    Ok((r.parse().map_err(usage)?, p.parse().map_err(usage)?))
}

pub fn bench(a: BenchArgs, seed: Option<u64>) -> Result<()> {
    let base = load_config(a.config.as_deref(), seed, a.ticks, &a.sets)?;
    let modes = a.modes.iter().map(|m| parse_mode(m)).collect::<Result<Vec<_>>>()?;
    if a.agents.contains(&0) {
        return Err(usage("--agents counts must be positive"));
    }
    let map = load_map(&a.map)?;
    let rows = engine::bench(&map, &base, &a.agents, &modes, &a.out)?;
    let table = format_bench(&rows);
    write_atomic(&a.out.join(BENCH_FILE), &table)?;
    print!("{table}");
    Ok(())
}

fn simulator() -> Result<PathBuf> {
    match std::env::var_os(SIM_BIN_ENV) {
        Some(p) if !p.is_empty() => Ok(PathBuf::from(p)),
        _ => std::env::current_exe().context("locating the polsim executable"),
    }
}

pub fn sweep(a: SweepArgs) -> Result<()> {
    require_file("--manifest", &a.manifest)?;
    let mut man = Manifest::load(&a.manifest)?;
    if let Some(w) = a.workers {
        man.workers = w;
    }
    if let Some(m) = a.mode {
        man.mode = m;
    }
    man.check()?;
    let mut launcher = ProcessLauncher::new(&simulator()?)?;
    log::info!("{} jobs, {} workers, {} mode, simulator {}", man.jobs.len(), man.workers, man.mode, launcher.program().display());
    let outcome = polsim_fleet::run(&man, &mut launcher, polsim_fleet::RunOptions { force: a.force })?;
    for s in &outcome.statuses {
        log::info!("{:<16} {:<8} {:>8.2} s", s.job_id, s.state.as_str(), s.wall_seconds);
    }
    log::info!("makespan {:.2} s over {} generation(s)", outcome.makespan, outcome.generations);
    if let Some(dir) = &a.collect {
        let report = collect(&outcome, dir)?;
        log::info!("merged {} runs into {}", report.merged.len(), dir.display());
    }
    let failed = outcome.statuses.iter().filter(|s| s.state != JobState::Done).count();
    if failed > 0 {
        return Err(Incomplete(format!("{failed} of {} jobs failed", outcome.statuses.len())).into());
    }
    Ok(())
}
