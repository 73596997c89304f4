//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

use std::cell::OnceCell;
use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::os::unix::fs::PermissionsExt;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;

use polsim_core::engine::{parse_summary, run, strip_wall_clock, LogToggles, SimConfig, SUMMARY_FILE};
use polsim_core::geomap::synth::{synth_world, SynthConfig};
use polsim_core::geomap::{Edge, IngestConfig, Point, UnitKind, WalkwayGraph, WorldMap};
use polsim_core::logio::*;
use polsim_core::mobility::plan_route;
use polsim_core::needs::{PoiSelection, ReevalMode};
use polsim_core::rng::{derive_stream, Stream};
use polsim_fleet::{JobSpec, Manifest, Mode, RunOptions, VirtualLauncher};
use sha2::{Digest, Sha256};

const BIN: &str = env!("CARGO_BIN_EXE_polsim");
const FIXTURE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/helsinki");

type Check = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn polsim(args: &[&str], env: &[(&str, &Path)]) -> Output {
    let mut cmd = Command::new(BIN);
    cmd.arg("--quiet").args(args);
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("spawn polsim")
}

fn polsim_ok(args: &[&str]) -> Result<Output, String> {
    let out = polsim(args, &[]);
    if out.status.success() {
        Ok(out)
    } else {
        Err(format!("polsim {} exited {}: {}", args.join(" "), out.status, String::from_utf8_lossy(&out.stderr).trim()))
    }
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn summary_of(dir: &Path) -> BTreeMap<String, String> {
    parse_summary(&fs::read_to_string(dir.join(SUMMARY_FILE)).unwrap()).unwrap()
}

fn num(summary: &BTreeMap<String, String>, key: &str) -> f64 {
    summary[key].parse().unwrap()
}

struct Ctx {
    dir: PathBuf,
    city: OnceCell<Result<PathBuf, String>>,
    main_run: OnceCell<Result<PathBuf, String>>,
    crisis: OnceCell<(PathBuf, PathBuf)>,
}

impl Ctx {
    /// Synthetic city of about 2,000 buildings, written by the CLI.
    fn city(&self) -> Result<&Path, String> {
        self.city
            .get_or_init(|| {
                let map = self.dir.join("city.polmap");
                polsim_ok(&["synth-map", "--grid", "22x23", "--out", s(&self.dir.join("city-layers")), "--map", s(&map)])?;
                Ok(map)
            })
            .as_deref()
            .map_err(Clone::clone)
    }

    /// 1000 agents for ten days with default settings, through the CLI.
    fn main_run(&self) -> Result<&Path, String> {
        self.main_run
            .get_or_init(|| {
                let map = self.city()?.to_path_buf();
                let out = self.dir.join("main");
                polsim_ok(&["run", "--map", s(&map), "--out", s(&out)])?;
                Ok(out)
            })
            .as_deref()
            .map_err(Clone::clone)
    }

    /// Ten-day runs that start broke, in daily and per-tick modes.
    fn crisis(&self) -> &(PathBuf, PathBuf) {
        self.crisis.get_or_init(|| {
            let map = WorldMap::load(self.city().unwrap()).unwrap();
            let dirs = (self.dir.join("crisis-daily"), self.dir.join("crisis-per-tick"));
            for (mode, out) in [(ReevalMode::Daily, &dirs.0), (ReevalMode::PerTick, &dirs.1)] {
                let cfg = SimConfig {
                    seed: 4,
                    agents: 500,
                    reevaluation: mode,
                    initial_balance_cents: 0,
                    logs: LogToggles { relocation: true, ..LogToggles::default() },
                    ..SimConfig::default()
                };
                run(&cfg, &map, out).unwrap();
            }
            dirs
        })
    }
}

fn sha_dir(dir: &Path) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        let name = p.file_name().unwrap().to_string_lossy().into_owned();
        let mut bytes = fs::read(&p).unwrap();
        if name == SUMMARY_FILE {
            bytes = strip_wall_clock(&String::from_utf8(bytes).unwrap()).into_bytes();
        }
        let digest = Sha256::digest(&bytes);
        out.insert(name, digest.iter().map(|b| format!("{b:02x}")).collect());
    }
    out
}

fn c1_determinism(ctx: &Ctx) -> Check {
    let t0 = Instant::now();
    let map = synth_world(&SynthConfig::default(), &IngestConfig::default()).unwrap();
    let variants: [(u64, fn(&mut SimConfig)); 5] = [
        (1, |_| {}),
        (2, |c| c.reevaluation = ReevalMode::PerTick),
        (3, |c| c.poi_selection = PoiSelection::Network),
        (4, |c| {
            c.initial_balance_cents = 0;
            c.logs.relocation = true;
        }),
        (5, |c| {
            c.social.delta_meet = 0.3;
            c.needs.decay.social = 0.004;
        }),
    ];
    let mut differing = Vec::new();
    for (seed, tweak) in variants {
        let mut cfg = SimConfig { seed, agents: 200, ticks: 288, ..SimConfig::default() };
        tweak(&mut cfg);
        let a = ctx.dir.join(format!("det-{seed}-a"));
        let b = ctx.dir.join(format!("det-{seed}-b"));
        run(&cfg, &map, &a).unwrap();
        run(&cfg, &map, &b).unwrap();
        if sha_dir(&a) != sha_dir(&b) {
            differing.push(seed);
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    ensure(differing.is_empty() && secs < 60.0, format!("5 configs x 2 runs identical, differing seeds {differing:?}, {secs:.1} s"))
}

fn dijkstra(n: usize, edges: &[(usize, usize, f64)], src: usize) -> Vec<f64> {
    let mut w = vec![vec![f64::INFINITY; n]; n];
    for &(u, v, l) in edges {
        w[u][v] = w[u][v].min(l);
        w[v][u] = w[v][u].min(l);
    }
    let mut dist = vec![f64::INFINITY; n];
    let mut done = vec![false; n];
    dist[src] = 0.0;
    while let Some(u) = (0..n).filter(|&i| !done[i] && dist[i].is_finite()).min_by(|&a, &b| dist[a].total_cmp(&dist[b])) {
        done[u] = true;
        for v in 0..n {
            if dist[u] + w[u][v] < dist[v] {
                dist[v] = dist[u] + w[u][v];
            }
        }
    }
    dist
}

fn random_graph(rng: &mut Stream) -> (Vec<Point>, Vec<(usize, usize, f64)>) {
    let n = 2 + rng.below(49) as usize;
    let pts: Vec<Point> = (0..n).map(|_| Point::new(rng.unit_f64() * 1000.0, rng.unit_f64() * 1000.0)).collect();
    // Lengths never undercut the straight line.
    let len = |a: usize, b: usize, r: &mut Stream| pts[a].dist(pts[b]) * (1.0 + r.unit_f64()) + 1e-3;
    let mut edges = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for i in 1..n {
        let j = rng.below(i as u64) as usize;
        seen.insert((j, i));
        edges.push((i, j, len(i, j, rng)));
    }
    for _ in 0..rng.below(2 * n as u64) {
        let (a, b) = (rng.below(n as u64) as usize, rng.below(n as u64) as usize);
        if a != b && seen.insert((a.min(b), a.max(b))) {
            edges.push((a, b, len(a, b, rng)));
        }
    }
    (pts, edges)
}

fn c2_routing(_: &Ctx) -> Check {
    let t0 = Instant::now();
    let mut rng = derive_stream(2024, "graphs");
    let (mut pairs, mut mismatches) = (0, 0);
    for _ in 0..100 {
        let (pts, edges) = random_graph(&mut rng);
        let e = edges.iter().map(|&(u, v, length)| Edge { u: u as u32, v: v as u32, length });
        let (g, _) = WalkwayGraph::from_parts(pts.clone(), e).unwrap();
        for src in 0..pts.len() {
            let oracle = dijkstra(pts.len(), &edges, src);
            for (dst, &want) in oracle.iter().enumerate() {
                pairs += 1;
                if plan_route(&g, src as u32, dst as u32).map(|p| p.length()) != Ok(want) {
                    mismatches += 1;
                }
            }
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    ensure(mismatches == 0 && secs < 10.0, format!("100 graphs, {pairs} pairs, {mismatches} mismatches, {secs:.2} s"))
}

fn c3_continuity(ctx: &Ctx) -> Check {
    let dir = ctx.main_run()?;
    let map = WorldMap::load(ctx.city()?).unwrap();
    let bound = 1.4 * 300.0 + map.anchor_teleport_bound() + 1e-6;
    let mut last: HashMap<u32, (f64, f64)> = HashMap::new();
    let (mut steps, mut violations, mut worst) = (0u64, 0u64, 0.0f64);
    for_each_record(&dir.join(LogKind::Trajectory.file_name()), |r: TrajectoryRecord| {
        let p = (r.x.to_f64(), r.y.to_f64());
        if let Some(q) = last.insert(r.agent, p) {
            let d = ((p.0 - q.0).powi(2) + (p.1 - q.1).powi(2)).sqrt();
            steps += 1;
            worst = worst.max(d);
            if d > bound {
                violations += 1;
            }
        }
    })
    .unwrap();
    ensure(
        violations == 0 && last.len() == 1000 && steps == 1000 * 2879,
        format!("{steps} steps, max {worst:.3} m, bound {bound:.3} m, {violations} violations"),
    )
}

fn relocations_per_day(dir: &Path) -> BTreeMap<(u32, u64, bool), u32> {
    let mut per = BTreeMap::new();
    for_each_record(&dir.join(LogKind::Relocation.file_name()), |r: RelocationRecord| {
        *per.entry((r.agent, r.tick / 288, r.what == Relocation::Home)).or_insert(0) += 1;
    })
    .unwrap();
    per
}

fn c4_once_per_day(ctx: &Ctx) -> Check {
    let (daily, per_tick) = ctx.crisis();
    let d = relocations_per_day(daily);
    let p = relocations_per_day(per_tick);
    let max_d = d.values().copied().max().unwrap_or(0);
    let max_p = p.values().copied().max().unwrap_or(0);
    let total = |m: &BTreeMap<_, u32>| m.values().map(|&v| v as u64).sum::<u64>();
    // The log must agree with the run's own counters.
    let sd = summary_of(daily);
    let logged_ok = total(&d) == (num(&sd, "home_changes") + num(&sd, "job_changes")) as u64;
    ensure(
        total(&d) > 0 && max_d <= 1 && max_p > 1 && logged_ok,
        format!(
            "daily: {} changes, max {max_d} per agent-day-kind; per_tick: {} changes, max {max_p}",
            total(&d),
            total(&p)
        ),
    )
}

fn c5_performance(ctx: &Ctx) -> Check {
    let dir = ctx.main_run()?;
    let sum = summary_of(dir);
    let (init, sim) = (num(&sum, "init_seconds"), num(&sum, "sim_seconds"));
    let map = WorldMap::load(ctx.city()?).unwrap();
    let quiet = LogToggles { trajectory: false, state: false, ..LogToggles::default() };
    let mut times = Vec::new();
    for agents in [1000, 5000] {
        let cfg = SimConfig { agents, logs: quiet, ..SimConfig::default() };
        times.push(run(&cfg, &map, &ctx.dir.join(format!("scale-{agents}"))).unwrap().sim_seconds);
    }
    let ratio = times[1] / times[0];
    ensure(
        init <= 30.0 && sim <= 300.0 && ratio <= 8.0,
        format!(
            "{} buildings; 1000 agents: init {init:.2} s, sim {sim:.2} s (reference 8.66 s, 76.2 s); 5000/1000 sim ratio {ratio:.2} ({:.2} s / {:.2} s)",
            map.buildings().len(),
            times[1],
            times[0]
        ),
    )
}

fn c6_ablation(ctx: &Ctx) -> Check {
    let map = WorldMap::load(ctx.city()?).unwrap();
    let median = |reevaluation, poi_selection, tag: &str| {
        let mut t: Vec<f64> = (0..3)
            .map(|i| {
                let cfg = SimConfig { agents: 1000, ticks: 288, reevaluation, poi_selection, ..SimConfig::default() };
                run(&cfg, &map, &ctx.dir.join(format!("abl-{tag}-{i}"))).unwrap().sim_seconds
            })
            .collect();
        t.sort_by(f64::total_cmp);
        t[1]
    };
    let improved = median(ReevalMode::Daily, PoiSelection::Euclidean, "improved");
    let vanilla = median(ReevalMode::PerTick, PoiSelection::Network, "vanilla");
    let ratio = vanilla / improved;
    ensure(ratio >= 2.0, format!("per_tick+network {vanilla:.3} s vs daily+euclidean {improved:.3} s: {ratio:.2}x (need >= 2x)"))
}

const FAKE_SIM: &str = r#"#!/bin/sh
out=""; dur=0
while [ $# -gt 0 ]; do
  case "$1" in
    --out) out="$2"; shift 2 ;;
    --set) case "$2" in duration=*) dur="${2#duration=}" ;; esac; shift 2 ;;
    *) shift ;;
  esac
done
mkdir -p "$out"
sleep "$dur"
"#;

fn sweep_makespan(dir: &Path, sim: &Path, mode: &str, durations: &[u32]) -> Result<f64, String> {
    let mut text = String::new();
    for (i, d) in durations.iter().enumerate() {
        text.push_str(&format!("[job j{i}]\nmap = none.polmap\nout = {mode}/j{i}\nseed = {i}\nset.duration = {d}\n"));
    }
    let manifest = dir.join(format!("{mode}.manifest"));
    fs::write(&manifest, text).unwrap();
    let out = polsim(&["sweep", "--manifest", s(&manifest), "--workers", "2", "--mode", mode], &[("POL_SIM_BIN", sim)]);
    if !out.status.success() {
        return Err(format!("sweep {mode} exited {}: {}", out.status, String::from_utf8_lossy(&out.stderr)));
    }
    let (mut first, mut last) = (f64::INFINITY, 0.0f64);
    for i in 0..durations.len() {
        let st = polsim_fleet::read_status(&dir.join(mode).join(format!("j{i}"))).unwrap().unwrap();
        first = first.min(st.started_at.unwrap());
        last = last.max(st.finished_at.unwrap());
    }
    Ok(last - first)
}

fn c7_scheduling(ctx: &Ctx) -> Check {
    let dir = ctx.dir.join("sched");
    fs::create_dir_all(&dir).unwrap();
    let sim = dir.join("fake-sim");
    fs::write(&sim, FAKE_SIM).unwrap();
    fs::set_permissions(&sim, fs::Permissions::from_mode(0o755)).unwrap();
    let durations = [4, 1, 1, 1, 1, 1];
    let q = sweep_makespan(&dir, &sim, "queue", &durations)?;
    let f = sweep_makespan(&dir, &sim, "forkjoin", &durations)?;

    let mut rng = derive_stream(7, "skewed");
    let mut violations = 0;
    for _ in 0..20 {
        let n = 4 + rng.below(12) as usize;
        let workers = 2 + rng.below(3) as usize;
        let jobs: Vec<JobSpec> = (0..n)
            .map(|i| {
                let d = if rng.below(5) == 0 { 10.0 + rng.unit_f64() * 30.0 } else { 0.5 + rng.unit_f64() * 2.0 };
                JobSpec { id: format!("j{i}"), map: "m".into(), config: None, out: dir.join("virtual").join(format!("j{i}")), overrides: vec![("duration".into(), d.to_string())] }
            })
            .collect();
        let makespan = |mode| {
            let m = Manifest { mode, workers, jobs: jobs.clone(), generations: Vec::new(), next_gen_command: None, base_dir: dir.clone() };
            let mut l = VirtualLauncher::new(|j: &JobSpec| (j.overrides[0].1.parse().unwrap(), 0));
            polsim_fleet::run(&m, &mut l, RunOptions { force: true }).unwrap().makespan
        };
        if makespan(Mode::Queue) > makespan(Mode::ForkJoin) {
            violations += 1;
        }
    }
    ensure(
        (4.5..=5.5).contains(&q) && (5.5..=6.5).contains(&f) && violations == 0,
        format!("queue {q:.2} s, forkjoin {f:.2} s; queue > forkjoin in {violations} of 20 random sets"),
    )
}

fn round_trip<R: Record>(path: &Path) -> (u64, u64) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let mut bad = u64::from(lines.next() != Some(R::KIND.header().as_str()));
    let mut n = 0;
    for line in lines {
        n += 1;
        if R::parse_line(line).map(|r| r.to_line()).as_deref() != Ok(line) {
            bad += 1;
        }
    }
    (n, bad)
}

fn c8_round_trip(ctx: &Ctx) -> Check {
    let (daily, per_tick) = ctx.crisis();
    let mut detail = Vec::new();
    let mut bad = 0;
    for (kind, (n, b)) in [
        (LogKind::Trajectory, round_trip::<TrajectoryRecord>(&daily.join(LogKind::Trajectory.file_name()))),
        (LogKind::Checkin, round_trip::<CheckinRecord>(&daily.join(LogKind::Checkin.file_name()))),
        (LogKind::State, round_trip::<StateRecord>(&daily.join(LogKind::State.file_name()))),
        (LogKind::Social, round_trip::<SocialEdgeRecord>(&daily.join(LogKind::Social.file_name()))),
        (LogKind::Relocation, round_trip::<RelocationRecord>(&daily.join(LogKind::Relocation.file_name()))),
    ] {
        bad += b + u64::from(n == 0);
        detail.push(format!("{} {n}", kind.name()));
    }
    let merged = ctx.dir.join("merged");
    let split = ctx.dir.join("split");
    concat_logs(&[("daily".into(), daily.clone()), ("per_tick".into(), per_tick.clone())], &merged).unwrap();
    split_logs(&merged, &split).unwrap();
    let mut differ = 0;
    for (id, dir) in [("daily", daily), ("per_tick", per_tick)] {
        for kind in LogKind::ALL {
            if fs::read(dir.join(kind.file_name())).unwrap() != fs::read(split.join(id).join(kind.file_name())).unwrap() {
                differ += 1;
            }
        }
    }
    ensure(bad == 0 && differ == 0, format!("records: {}; {bad} bad lines; concat/split: {differ} files differ", detail.join(", ")))
}

fn c9_behavior(ctx: &Ctx) -> Check {
    let dir = ctx.main_run()?;
    let mut meals = vec![0u32; 1000];
    for_each_record(&dir.join(LogKind::Checkin.file_name()), |r: CheckinRecord| {
        if r.kind == UnitKind::Restaurant {
            meals[r.agent as usize] += 1;
        }
    })
    .unwrap();
    // Length of each agent's trailing run of on-route ticks.
    let mut trailing = vec![0u64; 1000];
    for_each_record(&dir.join(LogKind::Trajectory.file_name()), |r: TrajectoryRecord| {
        let t = &mut trailing[r.agent as usize];
        *t = if r.status == Status::OnRoute { *t + 1 } else { 0 };
    })
    .unwrap();
    let edges = num(&summary_of(dir), "final_social_edges");
    let min_meals = meals.iter().copied().min().unwrap();
    let stuck = trailing.iter().filter(|&&t| t >= 288).count();
    ensure(
        min_meals >= 5 && edges >= 1.0 && stuck == 0,
        format!("min restaurant check-ins {min_meals}, social edges {edges}, agents on route for a day or more at the end {stuck}"),
    )
}

fn c10_real_map(ctx: &Ctx) -> Check {
    let fixture = Path::new(FIXTURE);
    let map = ctx.dir.join("helsinki.polmap");
    polsim_ok(&[
        "ingest",
        "--buildings",
        s(&fixture.join("buildings.geojson")),
        "--walkways",
        s(&fixture.join("walkways.geojson")),
        "--out",
        s(&map),
    ])?;
    let report = String::from_utf8(polsim_ok(&["validate", "--map", s(&map)])?.stdout).unwrap();
    let out = ctx.dir.join("helsinki-run");
    polsim_ok(&["run", "--map", s(&map), "--out", s(&out), "--set", "agents=100", "--ticks", "288"])?;
    let sum = summary_of(&out);
    let files = LogKind::CORE.iter().all(|k| out.join(k.file_name()).is_file());
    let loaded = WorldMap::load(&map).unwrap();
    ensure(
        report.starts_with("valid = true") && files && num(&sum, "checkins") > 0.0 && num(&sum, "records.trajectory") == 28800.0,
        format!(
            "{} buildings, {} units, {} walkway nodes in one component; {} check-ins",
            loaded.buildings().len(),
            loaded.units().len(),
            loaded.graph().node_count(),
            sum["checkins"]
        ),
    )
}

fn main() {
    let tmp = tempfile::tempdir().unwrap();
    let ctx = Ctx { dir: tmp.path().to_path_buf(), city: OnceCell::new(), main_run: OnceCell::new(), crisis: OnceCell::new() };
    let criteria: [(&str, fn(&Ctx) -> Check); 10] = [
        ("determinism", c1_determinism),
        ("routing oracle", c2_routing),
        ("trajectory continuity", c3_continuity),
        ("once-per-day relocation", c4_once_per_day),
        ("performance", c5_performance),
        ("optimization ablation", c6_ablation),
        ("scheduler semantics", c7_scheduling),
        ("log round trip", c8_round_trip),
        ("behavioral sanity", c9_behavior),
        ("real map pipeline", c10_real_map),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.into_iter().enumerate() {
        let t0 = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(|| f(&ctx))).unwrap_or_else(|e| {
            Err(e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_else(|| "panicked".into()))
        });
        let secs = t0.elapsed().as_secs_f64();
        match result {
            Ok(d) => println!("acceptance {:>2} {name}: PASS ({d}) [{secs:.1} s]", i + 1),
            Err(d) => {
                failed += 1;
                println!("acceptance {:>2} {name}: FAIL ({d}) [{secs:.1} s]", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
