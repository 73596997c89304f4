mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use common::{meal, recreation, rent, strip_map, synth, wage};
use polsim_core::engine::*;
use polsim_core::geomap::{UnitKind, WorldMap};
use polsim_core::logio::Relocation;
use polsim_core::mobility::Kinematics;
use polsim_core::needs::{FinancialKind, NeedVector, ReevalMode};
use polsim_core::rng::derive_stream;
use sha2::{Digest, Sha256};

fn digest_dir(dir: &Path) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        let name = p.file_name().unwrap().to_string_lossy().into_owned();
        let bytes = fs::read(&p).unwrap();
        let bytes = if name == SUMMARY_FILE { strip_wall_clock(std::str::from_utf8(&bytes).unwrap()).into_bytes() } else { bytes };
        out.insert(name, Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect::<String>());
    }
    out
}

#[test]
fn init_matches_stream_replay() {
    let map = synth(10, 10, 3);
    let cfg = SimConfig { seed: 1234, agents: 1000, ..Default::default() };
    let s = init_world(&cfg, &map).unwrap();
    let homes = map.units_of_kind(UnitKind::Residential);
    let jobs = map.units_of_kind(UnitKind::Workplace);
    let mut r = derive_stream(1234, "init");
    let mut expected = BTreeMap::new();
    let mut actual = BTreeMap::new();
    for a in &s.agents {
        *expected.entry(homes[r.below(homes.len() as u64) as usize]).or_insert(0) += 1;
        r.below(jobs.len() as u64);
        *actual.entry(a.home).or_insert(0) += 1;
        assert_eq!(a.needs, NeedVector::FULL);
        assert_eq!(a.balance, cfg.initial_balance_cents);
        assert_eq!(a.kin, Kinematics::AtUnit(a.home));
    }
    assert_eq!(actual, expected);
    assert_eq!(s.agents.iter().map(|a| a.id).collect::<Vec<_>>(), (0..1000).collect::<Vec<_>>());
}

#[test]
fn same_config_same_bytes() {
    let map = synth(10, 10, 0);
    let cfg = SimConfig { seed: 5, agents: 60, ticks: 400, logs: LogToggles { relocation: true, ..Default::default() }, ..Default::default() };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let sa = run(&cfg, &map, a.path()).unwrap();
    let sb = run(&cfg, &map, b.path()).unwrap();
    assert_eq!(sa.deterministic_text(), sb.deterministic_text());
    let (da, db) = (digest_dir(a.path()), digest_dir(b.path()));
    assert_eq!(da.len(), 6);
    assert_eq!(da, db);
    let c = tempfile::tempdir().unwrap();
    run(&SimConfig { seed: 6, ..cfg }, &map, c.path()).unwrap();
    assert_ne!(digest_dir(c.path())["trajectory.tsv"], da["trajectory.tsv"]);
}

/// Checks per-tick invariants while stepping; returns the collected records.
fn step_checked(cfg: &SimConfig, map: &WorldMap) -> (Collect, Vec<i64>) {
    let mut s = init_world(cfg, map).unwrap();
    let mut col = Collect::default();
    let n = cfg.agents as usize;
    let mut meals = vec![0; n];
    for _ in 0..cfg.ticks {
        let before: Vec<i64> = s.agents.iter().map(|a| a.balance).collect();
        let checkins_before = col.checkins.len();
        s.step(&mut col).unwrap();
        let tick = s.clock.tick;
        // Ledger: balance change equals the events of this tick.
        let mut delta = vec![0i64; n];
        for e in &s.last_events {
            assert_eq!(e.tick, tick);
            delta[e.agent as usize] += e.amount;
            if e.kind == FinancialKind::Meal {
                meals[e.agent as usize] += 1;
                let c = col.checkins[checkins_before..].iter().find(|c| c.agent == e.agent).expect("meal without check-in");
                assert_eq!(c.kind, UnitKind::Restaurant);
                assert_eq!(c.tick, tick);
            }
        }
        for (i, a) in s.agents.iter().enumerate() {
            assert_eq!(a.balance - before[i], delta[i], "agent {i} tick {tick}");
            assert!(a.needs.in_bounds());
        }
        // Social graph: symmetric, bounded, no self edges.
        let mut edges = 0;
        for a in 0..n as u32 {
            for (b, w) in s.social.neighbors(a) {
                assert_ne!(a, b);
                assert!(w > 0.0 && w <= 1.0);
                assert_eq!(s.social.weight(b, a), Some(w));
                assert_eq!(s.social.friends_of(a, 0.3).contains(&b), s.social.friends_of(b, 0.3).contains(&a));
                edges += 1;
            }
        }
        assert_eq!(edges, 2 * s.social.edge_count());
        assert!(s.social.edge_count() <= n * (n - 1) / 2);
    }
    (col, meals)
}

#[test]
fn per_tick_invariants_hold() {
    let map = synth(4, 4, 1);
    let cfg = SimConfig { seed: 11, agents: 40, ticks: 3 * TICKS_PER_DAY, ..Default::default() };
    let (col, meals) = step_checked(&cfg, &map);
    assert_eq!(col.trajectory.len(), 40 * 3 * TICKS_PER_DAY as usize);
    assert!(meals.iter().all(|&m| m > 0));
}

#[test]
fn crisis_invariants_hold() {
    let map = synth(4, 4, 2);
    let mut cfg = SimConfig { seed: 12, agents: 30, ticks: 2 * TICKS_PER_DAY, initial_balance_cents: 0, ..Default::default() };
    cfg.logs.relocation = true;
    let (col, _) = step_checked(&cfg, &map);
    assert!(!col.relocations.is_empty());
    // Daily mode: at most one home and one job change per agent and day.
    let mut per_day: BTreeMap<(u32, u64, bool), u32> = BTreeMap::new();
    for r in &col.relocations {
        *per_day.entry((r.agent, r.tick / TICKS_PER_DAY, r.what == Relocation::Home)).or_insert(0) += 1;
        assert_eq!((r.tick % TICKS_PER_DAY) / 12, 4);
    }
    assert!(per_day.values().all(|&c| c == 1));
}

#[test]
fn per_tick_mode_reevaluates_more_often() {
    let map = synth(4, 4, 2);
    let mut cfg = SimConfig { seed: 12, agents: 30, ticks: TICKS_PER_DAY, initial_balance_cents: 0, ..Default::default() };
    cfg.logs.relocation = true;
    cfg.reevaluation = ReevalMode::PerTick;
    let (col, _) = step_checked(&cfg, &map);
    let days: BTreeSet<(u32, u64)> = col.relocations.iter().map(|r| (r.agent, r.tick / TICKS_PER_DAY)).collect();
    assert!(col.relocations.len() > 2 * days.len(), "{} relocations over {} agent-days", col.relocations.len(), days.len());
}

#[test]
fn zero_delta_meet_keeps_graph_empty() {
    let map = synth(4, 4, 1);
    let mut cfg = SimConfig { agents: 60, ticks: 3 * TICKS_PER_DAY, ..Default::default() };
    cfg.social.delta_meet = 0.0;
    let mut s = init_world(&cfg, &map).unwrap();
    let mut col = Collect::default();
    for _ in 0..cfg.ticks {
        s.step(&mut col).unwrap();
        assert_eq!(s.social.edge_count(), 0);
    }
    assert!(col.social.is_empty());
}

#[test]
fn logging_does_not_touch_rng() {
    let map = synth(4, 4, 1);
    let on = SimConfig { seed: 3, agents: 25, ticks: 2 * TICKS_PER_DAY, initial_balance_cents: 500, ..Default::default() };
    let off = SimConfig { logs: LogToggles::none(), ..on.clone() };
    let mut a = init_world(&on, &map).unwrap();
    let mut b = init_world(&off, &map).unwrap();
    let mut col = Collect::default();
    for _ in 0..on.ticks {
        a.step(&mut col).unwrap();
        b.step(&mut NullObserver).unwrap();
    }
    assert!(!col.trajectory.is_empty());
    assert_ne!(a.rng, polsim_core::rng::Streams::new(3));
    assert_eq!(a.rng, b.rng);
    assert_eq!(a.agents, b.agents);
    assert_eq!(a.social, b.social);
}

#[test]
fn two_agents_at_one_site_make_one_edge() {
    let map = strip_map(&[rent(100), wage(10), meal(10), recreation()]);
    let cfg = SimConfig { agents: 2, ticks: 1, ..Default::default() };
    let mut s = init_world(&cfg, &map).unwrap();
    for a in &mut s.agents {
        a.kin = Kinematics::AtUnit(3);
        a.needs.social = 0.1;
    }
    s.step(&mut NullObserver).unwrap();
    assert_eq!(s.social.edges().collect::<Vec<_>>(), vec![(0, 1, cfg.social.delta_meet)]);
}

#[test]
fn travelling_agent_moves_420_m_per_tick() {
    let map = synth(16, 16, 1);
    let cfg = SimConfig { agents: 200, ticks: TICKS_PER_DAY, logs: LogToggles::none(), ..Default::default() };
    let mut s = init_world(&cfg, &map).unwrap();
    let mut checked = 0;
    for _ in 0..cfg.ticks {
        let before: Vec<Option<f64>> = s
            .agents
            .iter()
            .map(|a| match &a.kin {
                Kinematics::OnRoute { offset, .. } => Some(*offset),
                _ => None,
            })
            .collect();
        s.step(&mut NullObserver).unwrap();
        for (a, b) in s.agents.iter().zip(before) {
            if let (Some(b), Kinematics::OnRoute { offset, .. }) = (b, &a.kin) {
                assert!((offset - b - 420.0).abs() < 1e-9);
                checked += 1;
            }
        }
    }
    assert!(checked > 0);
}

#[test]
fn displacement_stays_bounded() {
    let map = synth(6, 6, 4);
    let bound = 1.4 * 300.0 + map.anchor_teleport_bound() + 1e-6;
    let cfg = SimConfig { agents: 80, ticks: 2 * TICKS_PER_DAY, ..Default::default() };
    let mut s = init_world(&cfg, &map).unwrap();
    let mut col = Collect::default();
    for _ in 0..cfg.ticks {
        s.step(&mut col).unwrap();
    }
    let mut last: BTreeMap<u32, (f64, f64)> = BTreeMap::new();
    for r in &col.trajectory {
        let p = (r.x.to_f64(), r.y.to_f64());
        if let Some(q) = last.insert(r.agent, p) {
            let d = ((p.0 - q.0).powi(2) + (p.1 - q.1).powi(2)).sqrt();
            assert!(d <= bound + 2e-6, "agent {} jumped {d} m at tick {}", r.agent, r.tick);
        }
    }
}

#[test]
fn summary_counts_match_files() {
    let map = synth(4, 4, 1);
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = SimConfig { agents: 20, ticks: 300, ..Default::default() };
    cfg.logs.state_stride = 7;
    let s = run(&cfg, &map, dir.path()).unwrap();
    for (kind, n) in &s.records {
        let lines = fs::read_to_string(dir.path().join(kind.file_name())).unwrap().lines().count() as u64;
        assert_eq!(lines, n + 1, "{kind:?}");
    }
    assert_eq!(s.records[&polsim_core::logio::LogKind::State], 20 * 300u64.div_ceil(7));
    let kv = parse_summary(&fs::read_to_string(dir.path().join(SUMMARY_FILE)).unwrap()).unwrap();
    for key in ["init_seconds", "sim_seconds", "ticks", "agents", "records.trajectory", "final_social_edges"] {
        assert!(kv.contains_key(key), "{key}");
    }
}
