//! World state and the per-tick step.

use std::collections::BTreeMap;
use std::io;

use thiserror::Error;

use super::clock::{SimClock, TICK_SECONDS};
use super::config::SimConfig;
use crate::geomap::{UnitId, UnitKind, WorldMap};
use crate::logio::{
    CheckinRecord, Fixed6, LogKind, Relocation, RelocationRecord, SocialEdgeRecord, StateRecord, Status, TrajectoryRecord,
};
use crate::mobility::{advance, begin_travel, position_of, Departure, RouteCache, ROUTE_CACHE_CAPACITY};
use crate::needs::{
    apply_financial_tick, choose_action, daily_reevaluation, decay_needs, eat_meal, reevaluation_due, Action, Activity, Agent,
    AgentId, DecisionParams, DecisionWarnings, FinancialEvent, FinancialKind,
};
use crate::rng::Streams;
use crate::social::{meeting_hint, SocialGraph};

#[derive(Debug, Error)]
pub enum InitError {
    #[error("map has no {0} units; agents need one")]
    MissingKind(UnitKind),
}

/// Receives records as the step produces them.
pub trait Observer {
    fn trajectory(&mut self, _r: &TrajectoryRecord) -> io::Result<()> {
        Ok(())
    }
    fn checkin(&mut self, _r: &CheckinRecord) -> io::Result<()> {
        Ok(())
    }
    fn state(&mut self, _r: &StateRecord) -> io::Result<()> {
        Ok(())
    }
    fn social(&mut self, _r: &SocialEdgeRecord) -> io::Result<()> {
        Ok(())
    }
    fn relocation(&mut self, _r: &RelocationRecord) -> io::Result<()> {
        Ok(())
    }
}

/// Discards everything.
#[derive(Debug, Default, Clone, Copy)]
pub struct NullObserver;

impl Observer for NullObserver {}

/// Keeps every record in memory.
#[derive(Debug, Default, Clone)]
pub struct Collect {
    pub trajectory: Vec<TrajectoryRecord>,
    pub checkins: Vec<CheckinRecord>,
    pub states: Vec<StateRecord>,
    pub social: Vec<SocialEdgeRecord>,
    pub relocations: Vec<RelocationRecord>,
}

impl Observer for Collect {
    fn trajectory(&mut self, r: &TrajectoryRecord) -> io::Result<()> {
        self.trajectory.push(*r);
        Ok(())
    }
    fn checkin(&mut self, r: &CheckinRecord) -> io::Result<()> {
        self.checkins.push(*r);
        Ok(())
    }
    fn state(&mut self, r: &StateRecord) -> io::Result<()> {
        self.states.push(*r);
        Ok(())
    }
    fn social(&mut self, r: &SocialEdgeRecord) -> io::Result<()> {
        self.social.push(*r);
        Ok(())
    }
    fn relocation(&mut self, r: &RelocationRecord) -> io::Result<()> {
        self.relocations.push(*r);
        Ok(())
    }
}

/// Running totals over a whole run.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct Counters {
    pub records: [u64; 5],
    pub checkins: u64,
    pub meals: u64,
    pub home_changes: u64,
    pub job_changes: u64,
    pub wages_cents: i64,
    pub rent_cents: i64,
    pub meals_cents: i64,
}

impl Counters {
    pub fn records_of(&self, kind: LogKind) -> u64 {
        self.records[kind as usize]
    }
}

pub struct SimState<'m> {
    /// Tick most recently executed; tick 0 before the first step.
    pub clock: SimClock,
    /// Next tick [`SimState::step`] will execute.
    next_tick: u64,
    pub agents: Vec<Agent>,
    pub social: SocialGraph,
    pub world: &'m WorldMap,
    pub rng: Streams,
    pub cfg: SimConfig,
    params: DecisionParams,
    cache: RouteCache,
    pub warnings: DecisionWarnings,
    pub counters: Counters,
    /// Financial events of the last step, in agent order.
    pub last_events: Vec<FinancialEvent>,
    /// `(agent, unit)` arrivals of the last step, ascending agent.
    pub last_arrivals: Vec<(AgentId, UnitId)>,
    // Scratch buffers reused across ticks.
    sites: Vec<Option<UnitId>>,
    pending: Vec<(AgentId, UnitId)>,
    budget: Vec<f64>,
}

/// Home and work for every agent: per agent, one residential draw then one
/// workplace draw from the `init` stream, uniform with replacement.
pub fn draw_assignments(cfg: &SimConfig, map: &WorldMap, rng: &mut Streams) -> Result<Vec<(UnitId, UnitId)>, InitError> {
    let homes = map.units_of_kind(UnitKind::Residential);
    let jobs = map.units_of_kind(UnitKind::Workplace);
    for (kind, pool) in [(UnitKind::Residential, homes), (UnitKind::Workplace, jobs)] {
        if pool.is_empty() {
            return Err(InitError::MissingKind(kind));
        }
    }
    Ok((0..cfg.agents)
        .map(|_| {
            let h = homes[rng.init.below(homes.len() as u64) as usize];
            let w = jobs[rng.init.below(jobs.len() as u64) as usize];
            (h, w)
        })
        .collect())
}

pub fn init_world<'m>(cfg: &SimConfig, map: &'m WorldMap) -> Result<SimState<'m>, InitError> {
    let mut rng = Streams::new(cfg.seed);
    let assignments = draw_assignments(cfg, map, &mut rng)?;
    let agents: Vec<Agent> = assignments
        .into_iter()
        .enumerate()
        .map(|(i, (h, w))| Agent::new(i as AgentId, h, w, cfg.initial_balance_cents, cfg.speed_mps))
        .collect();
    let n = agents.len();
    Ok(SimState {
        clock: SimClock::at(0),
        next_tick: 0,
        agents,
        social: SocialGraph::new(n),
        world: map,
        rng,
        params: DecisionParams { needs: cfg.needs, schedule: cfg.schedule, econ: cfg.econ, poi: cfg.poi_selection },
        cfg: cfg.clone(),
        cache: RouteCache::new(ROUTE_CACHE_CAPACITY),
        warnings: DecisionWarnings::default(),
        counters: Counters::default(),
        last_events: Vec::new(),
        last_arrivals: Vec::new(),
        sites: vec![None; n],
        pending: Vec::new(),
        budget: vec![TICK_SECONDS as f64; n],
    })
}

impl<'m> SimState<'m> {
    pub fn next_tick(&self) -> u64 {
        self.next_tick
    }

    pub fn route_cache(&self) -> &RouteCache {
        &self.cache
    }

    /// Recreation unit each agent stands at, if any.
    fn refresh_sites(&mut self) {
        for (slot, a) in self.sites.iter_mut().zip(&self.agents) {
            *slot = a.current_unit().filter(|&u| self.world.unit(u).kind == UnitKind::Recreation);
        }
    }

    /// Agents grouped by recreation unit, ascending unit then agent.
    fn recreation_groups(&self) -> BTreeMap<UnitId, Vec<AgentId>> {
        let mut groups: BTreeMap<UnitId, Vec<AgentId>> = BTreeMap::new();
        for (i, s) in self.sites.iter().enumerate() {
            if let Some(u) = s {
                groups.entry(*u).or_default().push(i as AgentId);
            }
        }
        groups
    }

    /// Executes the next tick.
    pub fn step(&mut self, obs: &mut dyn Observer) -> io::Result<()> {
        let map = self.world;
        let logs = self.cfg.logs;
        let speed = self.cfg.speed_mps;
        let friend_thr = self.cfg.social.friend_threshold;

        // 1. clock
        let clock = SimClock::at(self.next_tick);
        self.clock = clock;
        self.next_tick += 1;
        self.last_events.clear();
        self.last_arrivals.clear();

        // 2. needs, against where everyone stood at the start of the tick
        self.refresh_sites();
        let groups = self.recreation_groups();
        for a in &mut self.agents {
            let resting = a.current_unit() == Some(a.home) && self.params.schedule.is_sleep_hours(clock);
            let with_friend = match self.sites[a.id as usize] {
                Some(u) => self.social.has_friend_among(a.id, &groups[&u], friend_thr),
                None => false,
            };
            decay_needs(&mut a.needs, &self.params.needs, resting, with_friend);
        }

        // 3. home/job re-evaluation
        for a in &mut self.agents {
            if !reevaluation_due(a, clock, &self.params.schedule, self.cfg.reevaluation) {
                continue;
            }
            let r = daily_reevaluation(a, map, clock, &mut self.rng.reeval, &self.params.econ);
            for (what, change) in [(Relocation::Home, r.home), (Relocation::Job, r.job)] {
                let Some((from, to)) = change else { continue };
                match what {
                    Relocation::Home => self.counters.home_changes += 1,
                    Relocation::Job => self.counters.job_changes += 1,
                }
                if logs.relocation {
                    obs.relocation(&RelocationRecord { tick: clock.tick, agent: a.id, what, from, to })?;
                    self.counters.records[LogKind::Relocation as usize] += 1;
                }
            }
        }

        // 4. decisions for agents standing at a unit
        self.pending.clear();
        for a in &mut self.agents {
            self.budget[a.id as usize] = TICK_SECONDS as f64;
            let Some(here) = a.current_unit() else { continue };
            let hint = if a.needs.social < self.params.needs.threshold.social {
                meeting_hint(&self.social, a.id, friend_thr, &self.sites)
            } else {
                None
            };
            let action = choose_action(a, map, clock, hint, &self.params, &mut self.warnings);
            if action != Action::Stay {
                a.activity = action.activity();
            } else if a.activity == Activity::Travel {
                a.activity = Activity::Idle;
            }
            let Some(dest) = action.target(a) else { continue };
            if dest == here {
                // Another meal where the agent already is.
                if matches!(action, Action::GoEat(_)) {
                    self.pending.push((a.id, here));
                }
                continue;
            }
            match begin_travel(&mut a.kin, map, &mut self.cache, dest) {
                Ok(Departure::Stayed) => {}
                Ok(Departure::Arrived) => self.pending.push((a.id, dest)),
                Ok(Departure::Departed) => {
                    // The hop from the unit to its anchor node uses up part of the tick.
                    let hop = map.unit(here).location.dist(map.graph().point(map.anchor(here)));
                    self.budget[a.id as usize] = (TICK_SECONDS as f64 - hop / speed).max(0.0);
                }
                Err(e) => {
                    log::warn!("agent {} cannot reach unit {dest}: {e}", a.id);
                }
            }
        }

        // 5. movement
        for a in &mut self.agents {
            if a.kin.is_on_route() {
                if advance(&mut a.kin, a.speed, self.budget[a.id as usize]) {
                    self.pending.push((a.id, a.current_unit().expect("arrived agents stand at a unit")));
                } else {
                    a.activity = Activity::Travel;
                }
            }
        }
        self.pending.sort_unstable();
        for &(id, unit) in &self.pending {
            let a = &mut self.agents[id as usize];
            let u = map.unit(unit);
            self.counters.checkins += 1;
            if logs.checkin {
                obs.checkin(&CheckinRecord {
                    tick: clock.tick,
                    agent: id,
                    unit,
                    building: map.building_of(unit).id,
                    kind: u.kind,
                    x: Fixed6::from_f64(u.location.x),
                    y: Fixed6::from_f64(u.location.y),
                })?;
                self.counters.records[LogKind::Checkin as usize] += 1;
            }
            if u.kind == UnitKind::Restaurant && a.activity == Activity::Eat {
                self.counters.meals += 1;
                if let Some(e) = eat_meal(a, map, unit, clock.tick) {
                    self.counters.meals_cents += -e.amount;
                    self.last_events.push(e);
                }
            }
        }
        std::mem::swap(&mut self.last_arrivals, &mut self.pending);

        // 6. money
        for a in &mut self.agents {
            for e in apply_financial_tick(a, map, clock, &self.params.schedule) {
                match e.kind {
                    FinancialKind::Wage => self.counters.wages_cents += e.amount,
                    FinancialKind::Rent => self.counters.rent_cents += -e.amount,
                    FinancialKind::Meal => {}
                }
                self.last_events.push(e);
            }
        }
        self.last_events.sort_by_key(|e| e.agent);

        // 7. social network
        self.refresh_sites();
        let groups = self.recreation_groups();
        self.social.register_colocation(groups.values().map(|g| g.as_slice()), self.cfg.social.delta_meet);
        if clock.crosses_midnight() {
            self.social.decay(self.cfg.social.lambda_decay, self.cfg.social.prune_epsilon);
        }

        // 8. records
        if logs.trajectory {
            for a in &self.agents {
                let p = position_of(&a.kin, map);
                let status = if a.kin.is_on_route() { Status::OnRoute } else { Status::AtUnit };
                obs.trajectory(&TrajectoryRecord {
                    tick: clock.tick,
                    agent: a.id,
                    x: Fixed6::from_f64(p.x),
                    y: Fixed6::from_f64(p.y),
                    status,
                })?;
            }
            self.counters.records[LogKind::Trajectory as usize] += self.agents.len() as u64;
        }
        if logs.state && clock.tick % logs.state_stride == 0 {
            for a in &self.agents {
                obs.state(&StateRecord {
                    tick: clock.tick,
                    agent: a.id,
                    hunger: Fixed6::from_f64(a.needs.hunger),
                    energy: Fixed6::from_f64(a.needs.energy),
                    social: Fixed6::from_f64(a.needs.social),
                    balance_cents: a.balance,
                    mode: if a.kin.is_on_route() { Activity::Travel } else { a.activity },
                })?;
            }
            self.counters.records[LogKind::State as usize] += self.agents.len() as u64;
        }
        let last_tick = self.next_tick == self.cfg.ticks;
        if logs.social && (clock.is_end_of_day() || last_tick) {
            for (a, b, w) in self.social.edges() {
                obs.social(&SocialEdgeRecord { day: clock.day(), agent_a: a, agent_b: b, weight: Fixed6::from_f64(w) })?;
            }
            self.counters.records[LogKind::Social as usize] += self.social.edge_count() as u64;
        }
        Ok(())
    }
}
