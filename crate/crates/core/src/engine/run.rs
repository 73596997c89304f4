//! Whole runs: sinks, summary document, benchmark grid.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::fs::{self, File};
use std::io::{self, BufWriter};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use thiserror::Error;

use super::config::{ConfigError, SimConfig};
use super::state::{init_world, InitError, Observer};
use crate::geomap::WorldMap;
use crate::logio::{
    CheckinRecord, LogKind, LogSink, RelocationRecord, SocialEdgeRecord, StateRecord, TrajectoryRecord,
};
use crate::needs::{PoiSelection, ReevalMode};

pub const SUMMARY_FILE: &str = "summary.txt";
pub const SUMMARY_TAG: &str = "polsum/1";
/// Present in the output directory while a run is in progress or failed.
pub const PARTIAL_MARKER: &str = "run.partial";
/// Summary keys that measure wall-clock time and vary between runs.
pub const WALL_CLOCK_KEYS: [&str; 2] = ["init_seconds", "sim_seconds"];

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Init(#[from] InitError),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
}

fn io_at(path: &Path) -> impl FnOnce(io::Error) -> RunError + '_ {
    move |source| RunError::Io { path: path.to_path_buf(), source }
}

type FileSink = LogSink<BufWriter<File>>;

/// Writes records straight to the per-family TSV files.
struct FileObserver {
    sinks: BTreeMap<LogKind, FileSink>,
}

impl FileObserver {
    /// Core families always get a file, header-only when disabled, so a run
    /// directory has a fixed shape. Relocations only when enabled.
    fn create(dir: &Path, cfg: &SimConfig) -> Result<Self, RunError> {
        let mut sinks = BTreeMap::new();
        let mut kinds = LogKind::CORE.to_vec();
        if cfg.logs.relocation {
            kinds.push(LogKind::Relocation);
        }
        for kind in kinds {
            let path = dir.join(kind.file_name());
            sinks.insert(kind, LogSink::create(&path, kind).map_err(io_at(&path))?);
        }
        Ok(Self { sinks })
    }

    fn sink(&mut self, kind: LogKind) -> &mut FileSink {
        self.sinks.get_mut(&kind).expect("sink opened for every enabled family")
    }

    fn finish(self, dir: &Path) -> Result<(), RunError> {
        for (kind, sink) in self.sinks {
            sink.finish().map_err(io_at(&dir.join(kind.file_name())))?;
        }
        Ok(())
    }
}

impl Observer for FileObserver {
    fn trajectory(&mut self, r: &TrajectoryRecord) -> io::Result<()> {
        self.sink(LogKind::Trajectory).write(r)
    }
    fn checkin(&mut self, r: &CheckinRecord) -> io::Result<()> {
        self.sink(LogKind::Checkin).write(r)
    }
    fn state(&mut self, r: &StateRecord) -> io::Result<()> {
        self.sink(LogKind::State).write(r)
    }
    fn social(&mut self, r: &SocialEdgeRecord) -> io::Result<()> {
        self.sink(LogKind::Social).write(r)
    }
    fn relocation(&mut self, r: &RelocationRecord) -> io::Result<()> {
        self.sink(LogKind::Relocation).write(r)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub seed: u64,
    pub agents: u32,
    pub ticks: u64,
    pub reevaluation: ReevalMode,
    pub poi_selection: PoiSelection,
    /// Records written per family; `None` for families not written.
    pub records: BTreeMap<LogKind, u64>,
    pub checkins: u64,
    pub meals: u64,
    pub home_changes: u64,
    pub job_changes: u64,
    pub wages_cents: i64,
    pub rent_cents: i64,
    pub meals_cents: i64,
    pub final_social_edges: u64,
    pub final_mean_balance_cents: i64,
    pub route_cache_hits: u64,
    pub route_cache_misses: u64,
    pub init_seconds: f64,
    pub sim_seconds: f64,
}

impl RunSummary {
    /// The summary without wall-clock lines; equal for equal runs.
    pub fn deterministic_text(&self) -> String {
        strip_wall_clock(&self.to_string())
    }
}

/// Drops wall-clock lines from a summary document.
pub fn strip_wall_clock(text: &str) -> String {
    text.lines()
        .filter(|l| !WALL_CLOCK_KEYS.iter().any(|k| l.split('=').next().map(str::trim) == Some(*k)))
        .map(|l| format!("{l}\n"))
        .collect()
}

/// `key = value` pairs of a summary document.
pub fn parse_summary(text: &str) -> Result<BTreeMap<String, String>, String> {
    let mut lines = text.lines();
    match lines.next() {
        Some(SUMMARY_TAG) => {}
        other => return Err(format!("expected `{SUMMARY_TAG}` header, found {other:?}")),
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.split_once(" = ").map(|(k, v)| (k.to_string(), v.to_string())).ok_or_else(|| format!("malformed summary line `{l}`"))
        })
        .collect()
}

impl fmt::Display for RunSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{SUMMARY_TAG}")?;
        writeln!(f, "seed = {}", self.seed)?;
        writeln!(f, "agents = {}", self.agents)?;
        writeln!(f, "ticks = {}", self.ticks)?;
        writeln!(f, "reevaluation = {}", self.reevaluation)?;
        writeln!(f, "poi_selection = {}", self.poi_selection)?;
        for (kind, n) in &self.records {
            writeln!(f, "records.{} = {n}", kind.name())?;
        }
        writeln!(f, "checkins = {}", self.checkins)?;
        writeln!(f, "meals = {}", self.meals)?;
        writeln!(f, "home_changes = {}", self.home_changes)?;
        writeln!(f, "job_changes = {}", self.job_changes)?;
        writeln!(f, "wages_cents = {}", self.wages_cents)?;
        writeln!(f, "rent_cents = {}", self.rent_cents)?;
        writeln!(f, "meals_cents = {}", self.meals_cents)?;
        writeln!(f, "final_social_edges = {}", self.final_social_edges)?;
        writeln!(f, "final_mean_balance_cents = {}", self.final_mean_balance_cents)?;
        writeln!(f, "route_cache_hits = {}", self.route_cache_hits)?;
        writeln!(f, "route_cache_misses = {}", self.route_cache_misses)?;
        writeln!(f, "init_seconds = {:.6}", self.init_seconds)?;
        writeln!(f, "sim_seconds = {:.6}", self.sim_seconds)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Time already spent loading the map, counted as initialization.
    pub map_load: Duration,
}

/// Runs `cfg` on `map`, writing logs and `summary.txt` into `out`.
pub fn run(cfg: &SimConfig, map: &WorldMap, out: &Path) -> Result<RunSummary, RunError> {
    run_with(cfg, map, out, RunOptions::default())
}

pub fn run_with(cfg: &SimConfig, map: &WorldMap, out: &Path, opts: RunOptions) -> Result<RunSummary, RunError> {
    cfg.validate()?;
    fs::create_dir_all(out).map_err(io_at(out))?;
    let marker = out.join(PARTIAL_MARKER);
    fs::write(&marker, "").map_err(io_at(&marker))?;

    let t0 = Instant::now();
    let mut state = init_world(cfg, map)?;
    let init_seconds = (opts.map_load + t0.elapsed()).as_secs_f64();

    let mut obs = FileObserver::create(out, cfg)?;
    let t1 = Instant::now();
    for _ in 0..cfg.ticks {
        state.step(&mut obs).map_err(io_at(out))?;
    }
    obs.finish(out)?;
    let sim_seconds = t1.elapsed().as_secs_f64();
    if state.warnings.missing_restaurant || state.warnings.missing_recreation {
        log::warn!("map lacks a unit kind some decisions needed; those agents stayed put");
    }

    let c = state.counters;
    let mut records: BTreeMap<LogKind, u64> = LogKind::CORE.iter().map(|&k| (k, c.records_of(k))).collect();
    if cfg.logs.relocation {
        records.insert(LogKind::Relocation, c.records_of(LogKind::Relocation));
    }
    let total: i128 = state.agents.iter().map(|a| a.balance as i128).sum();
    let (hits, misses) = state.route_cache().stats();
    let summary = RunSummary {
        seed: cfg.seed,
        agents: cfg.agents,
        ticks: cfg.ticks,
        reevaluation: cfg.reevaluation,
        poi_selection: cfg.poi_selection,
        records,
        checkins: c.checkins,
        meals: c.meals,
        home_changes: c.home_changes,
        job_changes: c.job_changes,
        wages_cents: c.wages_cents,
        rent_cents: c.rent_cents,
        meals_cents: c.meals_cents,
        final_social_edges: state.social.edge_count() as u64,
        final_mean_balance_cents: (total / state.agents.len() as i128) as i64,
        route_cache_hits: hits,
        route_cache_misses: misses,
        init_seconds,
        sim_seconds,
    };
    let path = out.join(SUMMARY_FILE);
    fs::write(&path, summary.to_string()).map_err(io_at(&path))?;
    fs::remove_file(&marker).map_err(io_at(&marker))?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub agents: u32,
    pub ticks: u64,
    pub reevaluation: ReevalMode,
    pub poi_selection: PoiSelection,
    pub init_seconds: f64,
    pub sim_seconds: f64,
}

/// Runs every `agents × modes` combination of `base`, each into its own
/// directory under `dir`.
pub fn bench(
    map: &WorldMap,
    base: &SimConfig,
    agents: &[u32],
    modes: &[(ReevalMode, PoiSelection)],
    dir: &Path,
) -> Result<Vec<BenchRow>, RunError> {
    let mut rows = Vec::new();
    for &n in agents {
        for &(reevaluation, poi_selection) in modes {
            let cfg = SimConfig { agents: n, reevaluation, poi_selection, ..base.clone() };
            let out = dir.join(format!("a{n}-{reevaluation}-{poi_selection}"));
            log::info!("bench: {n} agents, {reevaluation}/{poi_selection}");
            let s = run(&cfg, map, &out)?;
            rows.push(BenchRow {
                agents: n,
                ticks: cfg.ticks,
                reevaluation,
                poi_selection,
                init_seconds: s.init_seconds,
                sim_seconds: s.sim_seconds,
            });
        }
    }
    Ok(rows)
}

/// One line per row: agents, modes, then initialization and simulation time.
pub fn format_bench(rows: &[BenchRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:>7}  {:>6}  {:<9}  {:<9}  {:>10}  {:>10}  {:>8}", "agents", "ticks", "reeval", "poi", "init_s", "sim_s", "sim_min");
    for r in rows {
        let _ = writeln!(
            s,
            "{:>7}  {:>6}  {:<9}  {:<9}  {:>10.3}  {:>10.3}  {:>8.2}",
            r.agents,
            r.ticks,
            r.reevaluation.to_string(),
            r.poi_selection.to_string(),
            r.init_seconds,
            r.sim_seconds,
            r.sim_seconds / 60.0
        );
    }
    s
}
