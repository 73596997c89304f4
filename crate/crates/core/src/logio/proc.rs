//! Post-processing: concatenate, split, downsample, statistics, export.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDateTime;
use serde_json::{json, Value};

use super::records::{CheckinRecord, LogKind, SocialEdgeRecord, StateRecord, TrajectoryRecord};
use super::{for_each_record, io_err, Fixed6, ProcError};
use crate::engine::clock::{TICKS_PER_DAY, TICK_SECONDS};
use crate::geomap::WorldMap;
use crate::needs::AgentId;
use crate::social::degree_histogram_from_edges;

/// Run order of a concatenated dataset, one id per line.
pub const RUNS_FILE: &str = "runs.txt";
pub const EPOCH_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

fn create(path: &Path) -> Result<BufWriter<File>, ProcError> {
    Ok(BufWriter::with_capacity(1 << 20, File::create(path).map_err(io_err(path))?))
}

fn lines_of(path: &Path) -> Result<std::io::Lines<BufReader<File>>, ProcError> {
    if !path.exists() {
        return Err(ProcError::Missing { path: path.to_path_buf() });
    }
    Ok(BufReader::new(File::open(path).map_err(io_err(path))?).lines())
}

/// Merges the logs of several runs, prefixing every line with its run id.
/// Runs are written in the given order. Returns body line counts per family.
pub fn concat_logs(runs: &[(String, PathBuf)], out_dir: &Path) -> Result<BTreeMap<LogKind, u64>, ProcError> {
    if runs.is_empty() {
        return Err(ProcError::Invalid("no runs to concatenate".into()));
    }
    let mut seen = BTreeSet::new();
    for (id, _) in runs {
        if id.is_empty() || id.contains(['\t', '\n', '\r']) {
            return Err(ProcError::Schema { run: id.clone(), message: "run id must be non-empty without tabs or newlines".into() });
        }
        if !seen.insert(id) {
            return Err(ProcError::Schema { run: id.clone(), message: "duplicate run id".into() });
        }
    }
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let mut kinds = LogKind::CORE.to_vec();
    if runs[0].1.join(LogKind::Relocation.file_name()).exists() {
        kinds.push(LogKind::Relocation);
    }
    let mut counts = BTreeMap::new();
    for kind in kinds {
        let out_path = out_dir.join(kind.file_name());
        let mut out = create(&out_path)?;
        writeln!(out, "{}", kind.merged_header()).map_err(io_err(&out_path))?;
        let mut n = 0u64;
        for (id, dir) in runs {
            let path = dir.join(kind.file_name());
            let mut lines = lines_of(&path).map_err(|e| match e {
                ProcError::Missing { .. } => ProcError::Schema { run: id.clone(), message: format!("missing {}", kind.file_name()) },
                other => other,
            })?;
            let header = lines.next().transpose().map_err(io_err(&path))?.unwrap_or_default();
            if header != kind.header() {
                let found = header.split('\t').next().unwrap_or("");
                return Err(ProcError::Schema {
                    run: id.clone(),
                    message: format!("{} has schema `{found}`, expected `{}`", kind.file_name(), kind.tag()),
                });
            }
            for line in lines {
                let line = line.map_err(io_err(&path))?;
                writeln!(out, "{id}\t{line}").map_err(io_err(&out_path))?;
                n += 1;
            }
        }
        out.flush().map_err(io_err(&out_path))?;
        counts.insert(kind, n);
    }
    let runs_path = out_dir.join(RUNS_FILE);
    let body: String = runs.iter().map(|(id, _)| format!("{id}\n")).collect();
    fs::write(&runs_path, body).map_err(io_err(&runs_path))?;
    Ok(counts)
}

/// Inverse of [`concat_logs`]: recreates `out_dir/<run_id>/<file>` for every run.
pub fn split_logs(merged_dir: &Path, out_dir: &Path) -> Result<Vec<String>, ProcError> {
    let runs_path = merged_dir.join(RUNS_FILE);
    let runs: Vec<String> = fs::read_to_string(&runs_path).map_err(io_err(&runs_path))?.lines().map(str::to_string).collect();
    for kind in LogKind::ALL {
        let path = merged_dir.join(kind.file_name());
        if !path.exists() {
            continue;
        }
        let mut lines = lines_of(&path)?;
        let header = lines.next().transpose().map_err(io_err(&path))?.unwrap_or_default();
        if header != kind.merged_header() {
            return Err(ProcError::Parse { path, line: 1, message: format!("expected header `{}`", kind.merged_header()) });
        }
        let mut done: BTreeSet<String> = BTreeSet::new();
        let mut current: Option<(String, PathBuf, BufWriter<File>)> = None;
        let open = |run: &str| -> Result<(PathBuf, BufWriter<File>), ProcError> {
            let dir = out_dir.join(run);
            fs::create_dir_all(&dir).map_err(io_err(&dir))?;
            let p = dir.join(kind.file_name());
            let mut w = create(&p)?;
            writeln!(w, "{}", kind.header()).map_err(io_err(&p))?;
            Ok((p, w))
        };
        for (i, line) in lines.enumerate() {
            let line = line.map_err(io_err(&path))?;
            let (run, rest) = line
                .split_once('\t')
                .ok_or_else(|| ProcError::Parse { path: path.clone(), line: i + 2, message: "missing run_id column".into() })?;
            if current.as_ref().is_none_or(|c| c.0 != run) {
                if let Some((id, p, mut w)) = current.take() {
                    w.flush().map_err(io_err(&p))?;
                    done.insert(id);
                }
                if done.contains(run) {
                    return Err(ProcError::Parse { path: path.clone(), line: i + 2, message: format!("run `{run}` is not contiguous") });
                }
                if !runs.iter().any(|r| r == run) {
                    return Err(ProcError::Parse { path: path.clone(), line: i + 2, message: format!("run `{run}` not listed in {RUNS_FILE}") });
                }
                let (p, w) = open(run)?;
                current = Some((run.to_string(), p, w));
            }
            let (_, p, w) = current.as_mut().unwrap();
            writeln!(w, "{rest}").map_err(io_err(p))?;
        }
        if let Some((id, p, mut w)) = current.take() {
            w.flush().map_err(io_err(&p))?;
            done.insert(id);
        }
        for run in runs.iter().filter(|r| !done.contains(*r)) {
            let (p, mut w) = open(run)?;
            w.flush().map_err(io_err(&p))?;
        }
    }
    Ok(runs)
}

/// Keeps the header and the records whose `tick` is a multiple of `stride`.
pub fn downsample(input: &Path, output: &Path, stride: u64) -> Result<u64, ProcError> {
    if stride == 0 {
        return Err(ProcError::Invalid("stride must be at least 1".into()));
    }
    let mut lines = lines_of(input)?;
    let header = lines.next().transpose().map_err(io_err(input))?.unwrap_or_default();
    let col = header
        .split('\t')
        .skip(1)
        .position(|c| c == "tick")
        .ok_or_else(|| ProcError::Parse { path: input.to_path_buf(), line: 1, message: "no tick column".into() })?;
    let mut out = create(output)?;
    writeln!(out, "{header}").map_err(io_err(output))?;
    let mut kept = 0;
    for (i, line) in lines.enumerate() {
        let line = line.map_err(io_err(input))?;
        let tick: u64 = line
            .split('\t')
            .nth(col)
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| ProcError::Parse { path: input.to_path_buf(), line: i + 2, message: "bad tick".into() })?;
        if tick % stride == 0 {
            writeln!(out, "{line}").map_err(io_err(output))?;
            kept += 1;
        }
    }
    out.flush().map_err(io_err(output))?;
    Ok(kept)
}

/// Summary statistics of one run's logs.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StatsReport {
    pub records: BTreeMap<LogKind, u64>,
    pub agents: usize,
    pub days: u64,
    /// Trips are check-ins after the first, per agent and day.
    pub trips: u64,
    pub mean_trips_per_agent_day: f64,
    /// Friend-degree histogram of the last social snapshot.
    pub degree_histogram: Vec<(usize, usize)>,
    /// Mean over agents of the last sampled balance of each day, in cents.
    pub mean_balance_per_day: Vec<(u64, f64)>,
}

impl fmt::Display for StatsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "polstats/1")?;
        for (k, n) in &self.records {
            writeln!(f, "records.{} = {n}", k.name())?;
        }
        writeln!(f, "agents = {}", self.agents)?;
        writeln!(f, "days = {}", self.days)?;
        writeln!(f, "trips = {}", self.trips)?;
        writeln!(f, "mean_trips_per_agent_day = {}", Fixed6::from_f64(self.mean_trips_per_agent_day))?;
        for (d, c) in &self.degree_histogram {
            writeln!(f, "degree.{d} = {c}")?;
        }
        for (day, b) in &self.mean_balance_per_day {
            writeln!(f, "mean_balance_cents.day{day} = {}", Fixed6::from_f64(*b))?;
        }
        Ok(())
    }
}

pub fn stats(run_dir: &Path, friend_threshold: f64) -> Result<StatsReport, ProcError> {
    let mut report = StatsReport::default();
    let mut agents: BTreeSet<AgentId> = BTreeSet::new();
    let mut max_tick: Option<u64> = None;
    let mut bump = |t: u64| max_tick = Some(max_tick.map_or(t, |m: u64| m.max(t)));

    let mut n = 0;
    for_each_record(&run_dir.join(LogKind::Trajectory.file_name()), |r: TrajectoryRecord| {
        n += 1;
        agents.insert(r.agent);
        bump(r.tick);
    })?;
    report.records.insert(LogKind::Trajectory, n);

    let mut checkins: HashMap<(AgentId, u64), u64> = HashMap::new();
    let mut n = 0;
    for_each_record(&run_dir.join(LogKind::Checkin.file_name()), |r: CheckinRecord| {
        n += 1;
        agents.insert(r.agent);
        bump(r.tick);
        *checkins.entry((r.agent, r.tick / TICKS_PER_DAY)).or_insert(0) += 1;
    })?;
    report.records.insert(LogKind::Checkin, n);

    let mut last_balance: BTreeMap<(u64, AgentId), i64> = BTreeMap::new();
    let mut n = 0;
    for_each_record(&run_dir.join(LogKind::State.file_name()), |r: StateRecord| {
        n += 1;
        agents.insert(r.agent);
        bump(r.tick);
        last_balance.insert((r.tick / TICKS_PER_DAY, r.agent), r.balance_cents);
    })?;
    report.records.insert(LogKind::State, n);

    let mut last_day: Option<u64> = None;
    let mut snapshot: Vec<(AgentId, AgentId, f64)> = Vec::new();
    let mut n = 0;
    for_each_record(&run_dir.join(LogKind::Social.file_name()), |r: SocialEdgeRecord| {
        n += 1;
        agents.insert(r.agent_a);
        agents.insert(r.agent_b);
        if last_day != Some(r.day) {
            last_day = Some(r.day);
            snapshot.clear();
        }
        snapshot.push((r.agent_a, r.agent_b, r.weight.to_f64()));
    })?;
    report.records.insert(LogKind::Social, n);

    report.agents = agents.len();
    report.days = max_tick.map_or(0, |t| t / TICKS_PER_DAY + 1);
    report.trips = checkins.values().map(|&c| c.saturating_sub(1)).sum();
    let agent_days = report.agents as u64 * report.days;
    report.mean_trips_per_agent_day = if agent_days == 0 { 0.0 } else { report.trips as f64 / agent_days as f64 };

    // Agent ids are dense from 0 in engine output; size the histogram to cover them all.
    let n_agents = agents.iter().next_back().map_or(0, |&a| a as usize + 1).max(report.agents);
    report.degree_histogram = if n_agents == 0 { Vec::new() } else { degree_histogram_from_edges(n_agents, snapshot, friend_threshold) };

    let mut per_day: BTreeMap<u64, (i128, u64)> = BTreeMap::new();
    for ((day, _), b) in last_balance {
        let e = per_day.entry(day).or_insert((0, 0));
        e.0 += b as i128;
        e.1 += 1;
    }
    report.mean_balance_per_day = per_day.into_iter().map(|(d, (s, c))| (d, s as f64 / c as f64)).collect();
    Ok(report)
}

pub fn parse_epoch(s: &str) -> Result<NaiveDateTime, ProcError> {
    NaiveDateTime::parse_from_str(s, EPOCH_FORMAT).map_err(|e| ProcError::Invalid(format!("epoch `{s}`: {e} (expected {EPOCH_FORMAT})")))
}

pub fn tick_to_iso(epoch: NaiveDateTime, tick: u64) -> String {
    (epoch + chrono::Duration::seconds((tick * TICK_SECONDS) as i64)).format(EPOCH_FORMAT).to_string()
}

/// One LineString per agent (a Point when only one sample survives) in
/// lon/lat, keeping ticks that are multiples of `stride`. With an epoch,
/// each feature also carries ISO-8601 timestamps per vertex.
pub fn export_geojson(trajectory: &Path, map: &WorldMap, stride: u64, epoch: Option<NaiveDateTime>) -> Result<Value, ProcError> {
    if stride == 0 {
        return Err(ProcError::Invalid("stride must be at least 1".into()));
    }
    let mut tracks: BTreeMap<AgentId, Vec<(u64, Fixed6, Fixed6)>> = BTreeMap::new();
    for_each_record(trajectory, |r: TrajectoryRecord| {
        if r.tick % stride == 0 {
            tracks.entry(r.agent).or_default().push((r.tick, r.x, r.y));
        }
    })?;
    let proj = map.projection();
    let features: Vec<Value> = tracks
        .into_iter()
        .map(|(agent, pts)| {
            let coords: Vec<Value> = pts
                .iter()
                .map(|&(_, x, y)| {
                    let (lon, lat) = proj.unproject(crate::geomap::Point::new(x.to_f64(), y.to_f64()));
                    json!([lon, lat])
                })
                .collect();
            let geometry = if coords.len() == 1 {
                json!({"type": "Point", "coordinates": coords[0]})
            } else {
                json!({"type": "LineString", "coordinates": coords})
            };
            let mut props = json!({"agent": agent, "start_tick": pts[0].0, "end_tick": pts[pts.len() - 1].0});
            if let Some(e) = epoch {
                props["times"] = Value::from(pts.iter().map(|p| tick_to_iso(e, p.0)).collect::<Vec<_>>());
            }
            json!({"type": "Feature", "geometry": geometry, "properties": props})
        })
        .collect();
    Ok(json!({"type": "FeatureCollection", "features": features}))
}
