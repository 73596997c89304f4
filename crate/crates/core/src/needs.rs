//! Agent needs, action selection, finances, and home/job re-evaluation.

use std::fmt;
use std::str::FromStr;

use crate::engine::clock::{Schedule, SimClock};
use crate::geomap::{euclidean_nearest_unit, network_nearest_unit, Cents, UnitId, UnitKind, WorldMap};
use crate::mobility::Kinematics;
use crate::rng::Stream;

pub type AgentId = u32;

/// Satisfaction levels in `[0, 1]`; 1 is fully satisfied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeedVector {
    pub hunger: f64,
    pub energy: f64,
    pub social: f64,
}

impl NeedVector {
    pub const FULL: NeedVector = NeedVector { hunger: 1.0, energy: 1.0, social: 1.0 };

    pub fn splat(v: f64) -> Self {
        Self { hunger: v, energy: v, social: v }
    }

    pub fn clamped(self) -> Self {
        Self { hunger: self.hunger.clamp(0.0, 1.0), energy: self.energy.clamp(0.0, 1.0), social: self.social.clamp(0.0, 1.0) }
    }

    pub fn in_bounds(&self) -> bool {
        [self.hunger, self.energy, self.social].iter().all(|v| (0.0..=1.0).contains(v))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeedParams {
    /// Loss per tick.
    pub decay: NeedVector,
    pub threshold: NeedVector,
    /// Energy gained per tick at home during sleep hours.
    pub sleep_restore: f64,
    /// Social gained per tick next to a friend at a recreation site.
    pub social_restore: f64,
}

impl Default for NeedParams {
    fn default() -> Self {
        Self {
            decay: NeedVector { hunger: 0.004, energy: 0.003, social: 0.002 },
            threshold: NeedVector::splat(0.3),
            sleep_restore: 0.01,
            social_restore: 0.02,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EconParams {
    /// Below `k_reserve * rent` an agent prioritizes work over socializing.
    pub k_reserve: f64,
    /// Below `k_crisis * rent` an agent looks for a cheaper home and a better job.
    pub k_crisis: f64,
    /// Candidates drawn per search.
    pub m_sample: u32,
}

impl Default for EconParams {
    fn default() -> Self {
        Self { k_reserve: 2.0, k_crisis: 1.0, m_sample: 10 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReevalMode {
    Daily,
    PerTick,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoiSelection {
    Euclidean,
    Network,
}

impl FromStr for ReevalMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "daily" => Ok(Self::Daily),
            "per_tick" => Ok(Self::PerTick),
            _ => Err(format!("expected daily or per_tick, got `{s}`")),
        }
    }
}

impl fmt::Display for ReevalMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Daily => "daily",
            Self::PerTick => "per_tick",
        })
    }
}

impl FromStr for PoiSelection {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "euclidean" => Ok(Self::Euclidean),
            "network" => Ok(Self::Network),
            _ => Err(format!("expected euclidean or network, got `{s}`")),
        }
    }
}

impl fmt::Display for PoiSelection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Euclidean => "euclidean",
            Self::Network => "network",
        })
    }
}

/// What an agent is doing, as written to the state log.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activity {
    Home,
    Work,
    Eat,
    Socialize,
    Idle,
    Travel,
}

impl Activity {
    pub const ALL: [Activity; 6] =
        [Activity::Home, Activity::Work, Activity::Eat, Activity::Socialize, Activity::Idle, Activity::Travel];

    pub fn as_str(self) -> &'static str {
        match self {
            Activity::Home => "home",
            Activity::Work => "work",
            Activity::Eat => "eat",
            Activity::Socialize => "socialize",
            Activity::Idle => "idle",
            Activity::Travel => "travel",
        }
    }
}

impl fmt::Display for Activity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Activity {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Activity::ALL.into_iter().find(|a| a.as_str() == s).ok_or_else(|| format!("unknown activity `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    pub id: AgentId,
    pub home: UnitId,
    pub work: UnitId,
    pub balance: Cents,
    pub needs: NeedVector,
    pub kin: Kinematics,
    /// Meters per second.
    pub speed: f64,
    pub last_reeval_day: Option<u64>,
    pub activity: Activity,
}

impl Agent {
    pub fn new(id: AgentId, home: UnitId, work: UnitId, balance: Cents, speed: f64) -> Self {
        Self {
            id,
            home,
            work,
            balance,
            needs: NeedVector::FULL,
            kin: Kinematics::AtUnit(home),
            speed,
            last_reeval_day: None,
            activity: Activity::Home,
        }
    }

    pub fn current_unit(&self) -> Option<UnitId> {
        self.kin.unit()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    Stay,
    GoHome,
    GoWork,
    GoEat(UnitId),
    GoSocialize(UnitId),
}

impl Action {
    /// Destination unit, if the action names one.
    pub fn target(self, agent: &Agent) -> Option<UnitId> {
        match self {
            Action::Stay => None,
            Action::GoHome => Some(agent.home),
            Action::GoWork => Some(agent.work),
            Action::GoEat(u) | Action::GoSocialize(u) => Some(u),
        }
    }

    pub fn activity(self) -> Activity {
        match self {
            Action::Stay => Activity::Idle,
            Action::GoHome => Activity::Home,
            Action::GoWork => Activity::Work,
            Action::GoEat(_) => Activity::Eat,
            Action::GoSocialize(_) => Activity::Socialize,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FinancialKind {
    Wage,
    Rent,
    Meal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FinancialEvent {
    pub tick: u64,
    pub agent: AgentId,
    pub kind: FinancialKind,
    pub amount: Cents,
}

/// Per-tick need update. `resting`: at home during sleep hours.
/// `with_friend`: at a recreation site together with at least one friend.
pub fn decay_needs(needs: &mut NeedVector, p: &NeedParams, resting: bool, with_friend: bool) {
    needs.hunger -= p.decay.hunger;
    needs.energy += if resting { p.sleep_restore - p.decay.energy } else { -p.decay.energy };
    needs.social += if with_friend { p.social_restore - p.decay.social } else { -p.decay.social };
    *needs = needs.clamped();
}

/// Inputs to [`choose_action`] that do not change during a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecisionParams {
    pub needs: NeedParams,
    pub schedule: Schedule,
    pub econ: EconParams,
    pub poi: PoiSelection,
}

/// Hierarchy weights: physiological needs dominate social ones.
pub const WEIGHT_HUNGER: f64 = 3.0;
pub const WEIGHT_ENERGY: f64 = 2.0;
pub const WEIGHT_SOCIAL: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Need {
    Hunger,
    Energy,
    Social,
}

/// Weighted deficits of the needs below threshold, in tie-break order.
pub fn weighted_deficits(needs: &NeedVector, thresholds: &NeedVector) -> Vec<(Need, f64)> {
    [
        (Need::Hunger, needs.hunger, thresholds.hunger, WEIGHT_HUNGER),
        (Need::Energy, needs.energy, thresholds.energy, WEIGHT_ENERGY),
        (Need::Social, needs.social, thresholds.social, WEIGHT_SOCIAL),
    ]
    .into_iter()
    .filter(|&(_, v, t, _)| v < t)
    .map(|(n, v, t, w)| (n, w * (t - v)))
    .collect()
}

/// Set when a decision needed a unit kind the map lacks.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct DecisionWarnings {
    pub missing_restaurant: bool,
    pub missing_recreation: bool,
}

fn nearest_of(agent: &Agent, map: &WorldMap, kind: UnitKind, poi: PoiSelection) -> Option<UnitId> {
    let here = agent.current_unit()?;
    match poi {
        PoiSelection::Euclidean => euclidean_nearest_unit(map, map.unit(here).location, kind, 1).first().copied(),
        PoiSelection::Network => network_nearest_unit(map, map.anchor(here), kind),
    }
}

/// Picks the next action for an agent standing at a unit.
///
/// Needs below threshold compete by weighted deficit (ties: hunger, energy,
/// social). During work hours an agent short of its rent reserve drops the
/// social candidate and goes to work unless hungry or tired. With no deficit
/// the schedule decides: work hours → work, sleep hours → home, else stay.
pub fn choose_action(
    agent: &Agent,
    map: &WorldMap,
    clock: SimClock,
    friend_hint: Option<UnitId>,
    p: &DecisionParams,
    warnings: &mut DecisionWarnings,
) -> Action {
    let work_hours = p.schedule.is_work_hours(clock);
    let reserve = p.econ.k_reserve * map.rent_of(agent.home) as f64;
    let pressured = work_hours && (agent.balance as f64) < reserve;
    let mut best: Option<(Need, f64)> = None;
    for (need, score) in weighted_deficits(&agent.needs, &p.needs.threshold) {
        if pressured && need == Need::Social {
            continue;
        }
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((need, score));
        }
    }
    match best.map(|b| b.0) {
        Some(Need::Hunger) => match nearest_of(agent, map, UnitKind::Restaurant, p.poi) {
            Some(u) => Action::GoEat(u),
            None => {
                warnings.missing_restaurant = true;
                Action::Stay
            }
        },
        Some(Need::Energy) => Action::GoHome,
        Some(Need::Social) => match friend_hint.or_else(|| nearest_of(agent, map, UnitKind::Recreation, p.poi)) {
            Some(u) => Action::GoSocialize(u),
            None => {
                warnings.missing_recreation = true;
                Action::Stay
            }
        },
        None if work_hours => Action::GoWork,
        None if p.schedule.is_sleep_hours(clock) => Action::GoHome,
        None => Action::Stay,
    }
}

/// Home and job switches made by one re-evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Reevaluation {
    /// `(old, new)` home unit.
    pub home: Option<(UnitId, UnitId)>,
    /// `(old, new)` work unit.
    pub job: Option<(UnitId, UnitId)>,
}

fn sample(rng: &mut Stream, pool: &[UnitId], m: u32) -> Vec<UnitId> {
    if pool.is_empty() {
        return Vec::new();
    }
    (0..m).map(|_| pool[rng.below(pool.len() as u64) as usize]).collect()
}

/// Home/job search for agents that cannot cover their rent.
///
/// In crisis (`balance < k_crisis * rent`) draws `m_sample` homes then
/// `m_sample` workplaces uniformly with replacement, moving to the cheapest
/// strictly cheaper home and the best strictly better-paid job. Ties go to
/// the smallest unit id. Draws nothing outside a crisis.
pub fn daily_reevaluation(agent: &mut Agent, map: &WorldMap, clock: SimClock, rng: &mut Stream, econ: &EconParams) -> Reevaluation {
    let mut out = Reevaluation::default();
    agent.last_reeval_day = Some(clock.day());
    let rent = map.rent_of(agent.home);
    if (agent.balance as f64) >= econ.k_crisis * rent as f64 {
        return out;
    }
    let homes = sample(rng, map.units_of_kind(UnitKind::Residential), econ.m_sample);
    if let Some(&best) = homes.iter().filter(|&&u| map.rent_of(u) < rent).min_by_key(|&&u| (map.rent_of(u), u)) {
        out.home = Some((agent.home, best));
        agent.home = best;
    }
    let wage = map.wage_of(agent.work);
    let jobs = sample(rng, map.units_of_kind(UnitKind::Workplace), econ.m_sample);
    if let Some(&best) = jobs.iter().filter(|&&u| map.wage_of(u) > wage).min_by_key(|&&u| (std::cmp::Reverse(map.wage_of(u)), u)) {
        out.job = Some((agent.work, best));
        agent.work = best;
    }
    out
}

/// Whether re-evaluation runs for this agent on this tick.
pub fn reevaluation_due(agent: &Agent, clock: SimClock, schedule: &Schedule, mode: ReevalMode) -> bool {
    match mode {
        ReevalMode::PerTick => true,
        ReevalMode::Daily => clock.local_hour() == schedule.reeval_hour && agent.last_reeval_day.is_none_or(|d| d < clock.day()),
    }
}

/// Wage for a tick at work during work hours and rent when the day rolls
/// over. Zero amounts produce no event.
pub fn apply_financial_tick(agent: &mut Agent, map: &WorldMap, clock: SimClock, schedule: &Schedule) -> Vec<FinancialEvent> {
    let mut events = Vec::new();
    if agent.current_unit() == Some(agent.work) && schedule.is_work_hours(clock) {
        let wage = map.wage_of(agent.work);
        if wage > 0 {
            events.push(FinancialEvent { tick: clock.tick, agent: agent.id, kind: FinancialKind::Wage, amount: wage });
        }
    }
    if clock.crosses_midnight() {
        let rent = map.rent_of(agent.home);
        if rent > 0 {
            events.push(FinancialEvent { tick: clock.tick, agent: agent.id, kind: FinancialKind::Rent, amount: -rent });
        }
    }
    for e in &events {
        agent.balance += e.amount;
    }
    events
}

/// A meal at `restaurant`: pays the price and restores hunger.
pub fn eat_meal(agent: &mut Agent, map: &WorldMap, restaurant: UnitId, tick: u64) -> Option<FinancialEvent> {
    agent.needs.hunger = 1.0;
    let price = map.meal_price_of(restaurant);
    (price > 0).then(|| {
        agent.balance -= price;
        FinancialEvent { tick, agent: agent.id, kind: FinancialKind::Meal, amount: -price }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geomap::tests::toy_map;
    use crate::rng::derive_stream;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn zero_rates_leave_needs_unchanged() {
        let p = NeedParams { decay: NeedVector::splat(0.0), sleep_restore: 0.0, social_restore: 0.0, ..Default::default() };
        let mut n = NeedVector { hunger: 0.4, energy: 0.7, social: 0.2 };
        decay_needs(&mut n, &p, true, true);
        assert_eq!(n, NeedVector { hunger: 0.4, energy: 0.7, social: 0.2 });
    }

    #[test]
    fn hunger_decays_to_zero_and_clamps() {
        let p = NeedParams { decay: NeedVector { hunger: 0.004, energy: 0.0, social: 0.0 }, ..Default::default() };
        let mut n = NeedVector { hunger: 0.010, energy: 1.0, social: 1.0 };
        decay_needs(&mut n, &p, false, false);
        assert!(close(n.hunger, 0.006));
        decay_needs(&mut n, &p, false, false);
        assert!(close(n.hunger, 0.002));
        decay_needs(&mut n, &p, false, false);
        assert_eq!(n.hunger, 0.0);
    }

    #[test]
    fn sleep_restores_net_of_decay() {
        let p = NeedParams { decay: NeedVector { hunger: 0.0, energy: 0.002, social: 0.0 }, sleep_restore: 0.01, ..Default::default() };
        let mut n = NeedVector { hunger: 1.0, energy: 0.5, social: 1.0 };
        decay_needs(&mut n, &p, true, false);
        assert!(close(n.energy, 0.508));
    }

    fn params() -> DecisionParams {
        DecisionParams { needs: NeedParams::default(), schedule: Schedule::default(), econ: EconParams::default(), poi: PoiSelection::Euclidean }
    }

    fn toy_agent(map: &WorldMap) -> Agent {
        let home = map.units_of_kind(UnitKind::Residential)[0];
        let work = map.units_of_kind(UnitKind::Workplace)[0];
        Agent::new(0, home, work, 1_000_000, 1.4)
    }

    const TUESDAY_11: SimClock = SimClock::at(288 + 11 * 12);
    const SUNDAY_03: SimClock = SimClock::at(6 * 288 + 3 * 12);

    #[test]
    fn schedule_defaults() {
        let map = toy_map();
        let a = toy_agent(&map);
        let mut w = DecisionWarnings::default();
        assert_eq!(choose_action(&a, &map, TUESDAY_11, None, &params(), &mut w), Action::GoWork);
        assert_eq!(choose_action(&a, &map, SUNDAY_03, None, &params(), &mut w), Action::GoHome);
        // Saturday afternoon, nothing to do.
        assert_eq!(choose_action(&a, &map, SimClock::at(5 * 288 + 14 * 12), None, &params(), &mut w), Action::Stay);
        assert_eq!(w, DecisionWarnings::default());
    }

    #[test]
    fn hunger_outweighs_energy() {
        let map = toy_map();
        let mut a = toy_agent(&map);
        a.needs = NeedVector { hunger: 0.1, energy: 0.25, social: 1.0 };
        // 3 * 0.2 = 0.6 against 2 * 0.05 = 0.1.
        let d = weighted_deficits(&a.needs, &NeedParams::default().threshold);
        assert_eq!(d.len(), 2);
        assert!(close(d[0].1, 0.6) && close(d[1].1, 0.1));
        let restaurant = map.units_of_kind(UnitKind::Restaurant)[0];
        assert_eq!(choose_action(&a, &map, TUESDAY_11, None, &params(), &mut DecisionWarnings::default()), Action::GoEat(restaurant));
    }

    #[test]
    fn equal_raw_deficits_prefer_hunger() {
        let map = toy_map();
        let mut a = toy_agent(&map);
        a.needs = NeedVector { hunger: 0.2, energy: 1.0, social: 0.2 };
        assert!(matches!(choose_action(&a, &map, SUNDAY_03, None, &params(), &mut DecisionWarnings::default()), Action::GoEat(_)));
    }

    #[test]
    fn social_uses_hint_then_nearest() {
        let map = toy_map();
        let mut a = toy_agent(&map);
        a.needs.social = 0.1;
        let rec = map.units_of_kind(UnitKind::Recreation)[0];
        let sat = SimClock::at(5 * 288 + 14 * 12);
        assert_eq!(choose_action(&a, &map, sat, Some(77), &params(), &mut DecisionWarnings::default()), Action::GoSocialize(77));
        assert_eq!(choose_action(&a, &map, sat, None, &params(), &mut DecisionWarnings::default()), Action::GoSocialize(rec));
    }

    #[test]
    fn financial_pressure_sends_to_work_but_not_over_hunger() {
        let map = toy_map();
        let mut a = toy_agent(&map);
        a.balance = 2 * map.rent_of(a.home) - 1;
        a.needs.social = 0.0;
        assert_eq!(choose_action(&a, &map, TUESDAY_11, None, &params(), &mut DecisionWarnings::default()), Action::GoWork);
        a.needs.hunger = 0.1;
        assert!(matches!(choose_action(&a, &map, TUESDAY_11, None, &params(), &mut DecisionWarnings::default()), Action::GoEat(_)));
        // Outside work hours the social need wins again.
        a.needs.hunger = 1.0;
        assert!(matches!(choose_action(&a, &map, SUNDAY_03, None, &params(), &mut DecisionWarnings::default()), Action::GoSocialize(_)));
    }

    #[test]
    fn choose_action_is_pure() {
        let map = toy_map();
        let mut a = toy_agent(&map);
        a.needs = NeedVector { hunger: 0.29, energy: 0.5, social: 0.05 };
        let first = choose_action(&a, &map, TUESDAY_11, None, &params(), &mut DecisionWarnings::default());
        for _ in 0..10 {
            assert_eq!(choose_action(&a, &map, TUESDAY_11, None, &params(), &mut DecisionWarnings::default()), first);
        }
    }

    #[test]
    fn no_crisis_only_stamps_day() {
        let map = toy_map();
        let mut a = toy_agent(&map);
        let before = a.clone();
        let mut rng = derive_stream(1, "reeval");
        let state = rng.state();
        let r = daily_reevaluation(&mut a, &map, SimClock::at(288 * 3 + 48), &mut rng, &EconParams::default());
        assert_eq!(r, Reevaluation::default());
        assert_eq!(a.last_reeval_day, Some(3));
        assert_eq!(Agent { last_reeval_day: None, ..a }, before);
        assert_eq!(rng.state(), state);
    }

    #[test]
    fn reevaluation_due_once_per_day() {
        let map = toy_map();
        let mut a = toy_agent(&map);
        let s = Schedule::default();
        let at4 = SimClock::at(288 + 4 * 12);
        assert!(!reevaluation_due(&a, SimClock::at(288 + 3 * 12), &s, ReevalMode::Daily));
        assert!(reevaluation_due(&a, at4, &s, ReevalMode::Daily));
        a.last_reeval_day = Some(1);
        assert!(!reevaluation_due(&a, SimClock::at(at4.tick + 1), &s, ReevalMode::Daily));
        assert!(reevaluation_due(&a, SimClock::at(at4.tick + 1), &s, ReevalMode::PerTick));
    }

    #[test]
    fn wage_and_rent() {
        let map = toy_map();
        let s = Schedule::default();
        let mut a = toy_agent(&map);
        let (wage, rent) = (map.wage_of(a.work), map.rent_of(a.home));
        a.kin = Kinematics::AtUnit(a.work);
        let start = a.balance;
        let ev = apply_financial_tick(&mut a, &map, SimClock::at(10 * 12), &s);
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].kind, FinancialKind::Wage);
        assert_eq!(a.balance, start + wage);

        // Midnight inside a shift that wraps past midnight: both rules fire.
        let wrap = Schedule { work_start_hour: 20, work_end_hour: 2, ..s };
        let before = a.balance;
        let ev = apply_financial_tick(&mut a, &map, SimClock::at(288), &wrap);
        assert_eq!(ev.iter().map(|e| e.kind).collect::<Vec<_>>(), vec![FinancialKind::Wage, FinancialKind::Rent]);
        assert_eq!(a.balance - before, wage - rent);
        assert_eq!(ev.iter().map(|e| e.amount).sum::<Cents>(), wage - rent);
    }

    #[test]
    fn meal_restores_hunger_and_charges() {
        let map = toy_map();
        let mut a = toy_agent(&map);
        a.needs.hunger = 0.2;
        let r = map.units_of_kind(UnitKind::Restaurant)[0];
        let before = a.balance;
        let ev = eat_meal(&mut a, &map, r, 5).unwrap();
        assert_eq!(a.needs.hunger, 1.0);
        assert_eq!(ev.amount, -map.meal_price_of(r));
        assert_eq!(a.balance, before + ev.amount);
    }
}
