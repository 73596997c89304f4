//! Run configuration: flat `key = value` text.

use std::collections::BTreeSet;
use std::fmt::{self, Write as _};
use std::path::PathBuf;

use thiserror::Error;

use super::clock::Schedule;
use crate::geomap::Cents;
use crate::kv::{parse_bool, KvDoc};
use crate::needs::{EconParams, NeedParams, PoiSelection, ReevalMode};
use crate::social::SocialParams;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "config line {l}: {}", self.message),
            None => write!(f, "config: {}", self.message),
        }
    }
}

impl ConfigError {
    pub fn new(message: impl Into<String>) -> Self {
        Self { line: None, message: message.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LogToggles {
    pub trajectory: bool,
    pub checkin: bool,
    pub state: bool,
    pub social: bool,
    /// Home/job switches; off by default.
    pub relocation: bool,
    /// State records are written on ticks that are multiples of this.
    pub state_stride: u64,
}

impl Default for LogToggles {
    fn default() -> Self {
        Self { trajectory: true, checkin: true, state: true, social: true, relocation: false, state_stride: 1 }
    }
}

impl LogToggles {
    pub fn none() -> Self {
        Self { trajectory: false, checkin: false, state: false, social: false, relocation: false, state_stride: 1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub seed: u64,
    pub agents: u32,
    pub ticks: u64,
    pub reevaluation: ReevalMode,
    pub poi_selection: PoiSelection,
    pub initial_balance_cents: Cents,
    /// Walking speed, meters per second.
    pub speed_mps: f64,
    pub needs: NeedParams,
    pub schedule: Schedule,
    pub econ: EconParams,
    pub social: SocialParams,
    pub logs: LogToggles,
    pub out: Option<PathBuf>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            agents: 1000,
            ticks: 2880,
            reevaluation: ReevalMode::Daily,
            poi_selection: PoiSelection::Euclidean,
            initial_balance_cents: 50_000,
            speed_mps: 1.4,
            needs: NeedParams::default(),
            schedule: Schedule::default(),
            econ: EconParams::default(),
            social: SocialParams::default(),
            logs: LogToggles::default(),
            out: None,
        }
    }
}

/// Every accepted key, in canonical order.
pub const KEYS: &[&str] = &[
    "seed",
    "agents",
    "ticks",
    "reevaluation",
    "poi_selection",
    "initial_balance_cents",
    "speed_mps",
    "needs.hunger_decay",
    "needs.energy_decay",
    "needs.social_decay",
    "needs.hunger_threshold",
    "needs.energy_threshold",
    "needs.social_threshold",
    "needs.sleep_restore",
    "needs.social_restore",
    "schedule.work_start_hour",
    "schedule.work_end_hour",
    "schedule.work_days",
    "schedule.sleep_start_hour",
    "schedule.sleep_end_hour",
    "schedule.reeval_hour",
    "econ.k_reserve",
    "econ.k_crisis",
    "econ.m_sample",
    "social.delta_meet",
    "social.lambda_decay",
    "social.friend_threshold",
    "social.prune_epsilon",
    "log.trajectory",
    "log.checkin",
    "log.state",
    "log.social",
    "log.relocation",
    "log.state_stride",
    "out",
];

fn parse<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, String>
where
    T::Err: fmt::Display,
{
    v.parse().map_err(|e| format!("{key}: cannot parse `{v}`: {e}"))
}

fn boolean(key: &str, v: &str) -> Result<bool, String> {
    parse_bool(v).ok_or_else(|| format!("{key}: expected true or false, got `{v}`"))
}

impl SimConfig {
    /// Parses a config document. Keys not set keep their defaults.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let doc = KvDoc::parse(text).map_err(|e| ConfigError { line: Some(e.line), message: e.message })?;
        if let Some(s) = doc.sections.first() {
            return Err(ConfigError { line: Some(s.line), message: format!("sections are not allowed here: [{}]", s.header) });
        }
        let mut cfg = Self::default();
        let mut seen = BTreeSet::new();
        for e in &doc.preamble {
            if !seen.insert(e.key.as_str()) {
                return Err(ConfigError { line: Some(e.line), message: format!("duplicate key `{}`", e.key) });
            }
            cfg.set(&e.key, &e.value).map_err(|message| ConfigError { line: Some(e.line), message })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies one key. Unknown keys are rejected.
    pub fn set(&mut self, key: &str, v: &str) -> Result<(), String> {
        match key {
            "seed" => self.seed = parse(key, v)?,
            "agents" => self.agents = parse(key, v)?,
            "ticks" => self.ticks = parse(key, v)?,
            "reevaluation" => self.reevaluation = parse(key, v)?,
            "poi_selection" => self.poi_selection = parse(key, v)?,
            "initial_balance_cents" => self.initial_balance_cents = parse(key, v)?,
            "speed_mps" => self.speed_mps = parse(key, v)?,
            "needs.hunger_decay" => self.needs.decay.hunger = parse(key, v)?,
            "needs.energy_decay" => self.needs.decay.energy = parse(key, v)?,
            "needs.social_decay" => self.needs.decay.social = parse(key, v)?,
            "needs.hunger_threshold" => self.needs.threshold.hunger = parse(key, v)?,
            "needs.energy_threshold" => self.needs.threshold.energy = parse(key, v)?,
            "needs.social_threshold" => self.needs.threshold.social = parse(key, v)?,
            "needs.sleep_restore" => self.needs.sleep_restore = parse(key, v)?,
            "needs.social_restore" => self.needs.social_restore = parse(key, v)?,
            "schedule.work_start_hour" => self.schedule.work_start_hour = parse(key, v)?,
            "schedule.work_end_hour" => self.schedule.work_end_hour = parse(key, v)?,
            "schedule.work_days" => self.schedule.work_days = parse(key, v)?,
            "schedule.sleep_start_hour" => self.schedule.sleep_start_hour = parse(key, v)?,
            "schedule.sleep_end_hour" => self.schedule.sleep_end_hour = parse(key, v)?,
            "schedule.reeval_hour" => self.schedule.reeval_hour = parse(key, v)?,
            "econ.k_reserve" => self.econ.k_reserve = parse(key, v)?,
            "econ.k_crisis" => self.econ.k_crisis = parse(key, v)?,
            "econ.m_sample" => self.econ.m_sample = parse(key, v)?,
            "social.delta_meet" => self.social.delta_meet = parse(key, v)?,
            "social.lambda_decay" => self.social.lambda_decay = parse(key, v)?,
            "social.friend_threshold" => self.social.friend_threshold = parse(key, v)?,
            "social.prune_epsilon" => self.social.prune_epsilon = parse(key, v)?,
            "log.trajectory" => self.logs.trajectory = boolean(key, v)?,
            "log.checkin" => self.logs.checkin = boolean(key, v)?,
            "log.state" => self.logs.state = boolean(key, v)?,
            "log.social" => self.logs.social = boolean(key, v)?,
            "log.relocation" => self.logs.relocation = boolean(key, v)?,
            "log.state_stride" => self.logs.state_stride = parse(key, v)?,
            "out" => self.out = Some(PathBuf::from(v)),
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |m: String| Err(ConfigError::new(m));
        if self.agents < 1 {
            return fail("agents must be at least 1".into());
        }
        if self.ticks < 1 {
            return fail("ticks must be at least 1".into());
        }
        if !(self.speed_mps > 0.0 && self.speed_mps.is_finite()) {
            return fail(format!("speed_mps must be positive, got {}", self.speed_mps));
        }
        let n = &self.needs;
        for (name, v) in [
            ("needs.hunger_decay", n.decay.hunger),
            ("needs.energy_decay", n.decay.energy),
            ("needs.social_decay", n.decay.social),
            ("needs.sleep_restore", n.sleep_restore),
            ("needs.social_restore", n.social_restore),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return fail(format!("{name} must be non-negative, got {v}"));
            }
        }
        for (name, v) in [
            ("needs.hunger_threshold", n.threshold.hunger),
            ("needs.energy_threshold", n.threshold.energy),
            ("needs.social_threshold", n.threshold.social),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return fail(format!("{name} must be in [0, 1], got {v}"));
            }
        }
        self.schedule.check().map_err(ConfigError::new)?;
        for (name, v) in [("econ.k_reserve", self.econ.k_reserve), ("econ.k_crisis", self.econ.k_crisis)] {
            if !(v >= 0.0 && v.is_finite()) {
                return fail(format!("{name} must be non-negative, got {v}"));
            }
        }
        self.social.check().map_err(ConfigError::new)?;
        if self.logs.state_stride < 1 {
            return fail("log.state_stride must be at least 1".into());
        }
        Ok(())
    }

    /// Canonical text form; parsing it reproduces the config.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let n = &self.needs;
        let sc = &self.schedule;
        let values: Vec<String> = vec![
            self.seed.to_string(),
            self.agents.to_string(),
            self.ticks.to_string(),
            self.reevaluation.to_string(),
            self.poi_selection.to_string(),
            self.initial_balance_cents.to_string(),
            self.speed_mps.to_string(),
            n.decay.hunger.to_string(),
            n.decay.energy.to_string(),
            n.decay.social.to_string(),
            n.threshold.hunger.to_string(),
            n.threshold.energy.to_string(),
            n.threshold.social.to_string(),
            n.sleep_restore.to_string(),
            n.social_restore.to_string(),
            sc.work_start_hour.to_string(),
            sc.work_end_hour.to_string(),
            sc.work_days.to_string(),
            sc.sleep_start_hour.to_string(),
            sc.sleep_end_hour.to_string(),
            sc.reeval_hour.to_string(),
            self.econ.k_reserve.to_string(),
            self.econ.k_crisis.to_string(),
            self.econ.m_sample.to_string(),
            self.social.delta_meet.to_string(),
            self.social.lambda_decay.to_string(),
            self.social.friend_threshold.to_string(),
            self.social.prune_epsilon.to_string(),
            self.logs.trajectory.to_string(),
            self.logs.checkin.to_string(),
            self.logs.state.to_string(),
            self.logs.social.to_string(),
            self.logs.relocation.to_string(),
            self.logs.state_stride.to_string(),
        ];
        for (k, v) in KEYS.iter().zip(values) {
            let _ = writeln!(s, "{k} = {v}");
        }
        if let Some(out) = &self.out {
            let _ = writeln!(s, "out = {}", out.display());
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_text() {
        let cfg = SimConfig::default();
        assert_eq!(SimConfig::parse(&cfg.to_text()).unwrap(), cfg);
        assert_eq!(cfg.to_text().lines().count(), KEYS.len() - 1);
    }

    #[test]
    fn parses_overrides_and_comments() {
        let cfg = SimConfig::parse("# demo\nagents = 5\nreevaluation = per_tick # vanilla\nlog.state = false\n").unwrap();
        assert_eq!(cfg.agents, 5);
        assert_eq!(cfg.reevaluation, ReevalMode::PerTick);
        assert!(!cfg.logs.state);
    }

    #[test]
    fn rejects_unknown_duplicate_and_invalid() {
        let e = SimConfig::parse("agents = 3\nagent = 4\n").unwrap_err();
        assert_eq!(e.line, Some(2));
        assert!(e.message.contains("unknown key"));
        assert!(SimConfig::parse("ticks = 1\nticks = 2\n").unwrap_err().message.contains("duplicate"));
        assert!(SimConfig::parse("ticks = 0\n").unwrap_err().message.contains("ticks"));
        assert!(SimConfig::parse("agents = 0\n").is_err());
        assert!(SimConfig::parse("poi_selection = astar\n").is_err());
        assert!(SimConfig::parse("needs.hunger_threshold = 1.5\n").is_err());
        assert!(SimConfig::parse("[job a]\nseed = 1\n").is_err());
    }
}
