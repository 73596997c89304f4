//! Log record types and their TSV lines.

use std::fmt::Write as _;

use super::fixed::Fixed6;
use crate::geomap::{Cents, UnitId, UnitKind};
use crate::needs::{Activity, AgentId};

/// The log families a run writes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LogKind {
    Trajectory,
    Checkin,
    State,
    Social,
    Relocation,
}

impl LogKind {
    pub const ALL: [LogKind; 5] = [LogKind::Trajectory, LogKind::Checkin, LogKind::State, LogKind::Social, LogKind::Relocation];
    /// Families every run writes; relocations are opt-in.
    pub const CORE: [LogKind; 4] = [LogKind::Trajectory, LogKind::Checkin, LogKind::State, LogKind::Social];

    pub fn tag(self) -> &'static str {
        match self {
            LogKind::Trajectory => TrajectoryRecord::TAG,
            LogKind::Checkin => CheckinRecord::TAG,
            LogKind::State => StateRecord::TAG,
            LogKind::Social => SocialEdgeRecord::TAG,
            LogKind::Relocation => RelocationRecord::TAG,
        }
    }

    pub fn columns(self) -> &'static [&'static str] {
        match self {
            LogKind::Trajectory => TrajectoryRecord::COLUMNS,
            LogKind::Checkin => CheckinRecord::COLUMNS,
            LogKind::State => StateRecord::COLUMNS,
            LogKind::Social => SocialEdgeRecord::COLUMNS,
            LogKind::Relocation => RelocationRecord::COLUMNS,
        }
    }

    pub fn file_name(self) -> &'static str {
        match self {
            LogKind::Trajectory => "trajectory.tsv",
            LogKind::Checkin => "checkins.tsv",
            LogKind::State => "states.tsv",
            LogKind::Social => "social.tsv",
            LogKind::Relocation => "relocations.tsv",
        }
    }

    /// Short name used in config keys and summaries.
    pub fn name(self) -> &'static str {
        match self {
            LogKind::Trajectory => "trajectory",
            LogKind::Checkin => "checkin",
            LogKind::State => "state",
            LogKind::Social => "social",
            LogKind::Relocation => "relocation",
        }
    }

    pub fn header(self) -> String {
        header_line(self.tag(), self.columns(), false)
    }

    /// Header of a concatenated file, with the leading `run_id` column.
    pub fn merged_header(self) -> String {
        header_line(self.tag(), self.columns(), true)
    }

    pub fn from_tag(tag: &str) -> Option<LogKind> {
        LogKind::ALL.into_iter().find(|k| k.tag() == tag)
    }
}

fn header_line(tag: &str, columns: &[&str], run_id: bool) -> String {
    let mut s = String::from(tag);
    if run_id {
        s.push_str("\trun_id");
    }
    for c in columns {
        s.push('\t');
        s.push_str(c);
    }
    s
}

/// One TSV line type.
pub trait Record: Sized {
    const KIND: LogKind;
    const TAG: &'static str;
    const COLUMNS: &'static [&'static str];

    /// Appends the fields (no trailing newline).
    fn write_line(&self, out: &mut String);
    fn parse_fields(fields: &[&str]) -> Result<Self, String>;

    fn to_line(&self) -> String {
        let mut s = String::new();
        self.write_line(&mut s);
        s
    }

    fn parse_line(line: &str) -> Result<Self, String> {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != Self::COLUMNS.len() {
            return Err(format!("expected {} fields, found {}", Self::COLUMNS.len(), fields.len()));
        }
        Self::parse_fields(&fields)
    }
}

fn int<T: std::str::FromStr>(s: &str, col: &str) -> Result<T, String> {
    // Canonical base-10 only: no sign on unsigned, no leading zeros, no `+`.
    let digits = s.strip_prefix('-').unwrap_or(s);
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) || (digits.len() > 1 && digits.starts_with('0')) || s == "-0" {
        return Err(format!("{col}: `{s}` is not a canonical integer"));
    }
    s.parse().map_err(|_| format!("{col}: `{s}` out of range"))
}

fn fixed(s: &str, col: &str) -> Result<Fixed6, String> {
    s.parse().map_err(|e| format!("{col}: {e}"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    AtUnit,
    OnRoute,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::AtUnit => "at_unit",
            Status::OnRoute => "on_route",
        }
    }

    fn parse(s: &str) -> Result<Self, String> {
        match s {
            "at_unit" => Ok(Status::AtUnit),
            "on_route" => Ok(Status::OnRoute),
            _ => Err(format!("status: unknown value `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrajectoryRecord {
    pub tick: u64,
    pub agent: AgentId,
    pub x: Fixed6,
    pub y: Fixed6,
    pub status: Status,
}

impl Record for TrajectoryRecord {
    const KIND: LogKind = LogKind::Trajectory;
    const TAG: &'static str = "poltraj/1";
    const COLUMNS: &'static [&'static str] = &["tick", "agent", "x", "y", "status"];

    fn write_line(&self, out: &mut String) {
        let _ = write!(out, "{}\t{}\t{}\t{}\t{}", self.tick, self.agent, self.x, self.y, self.status.as_str());
    }

    fn parse_fields(f: &[&str]) -> Result<Self, String> {
        Ok(Self {
            tick: int(f[0], "tick")?,
            agent: int(f[1], "agent")?,
            x: fixed(f[2], "x")?,
            y: fixed(f[3], "y")?,
            status: Status::parse(f[4])?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CheckinRecord {
    pub tick: u64,
    pub agent: AgentId,
    pub unit: UnitId,
    /// Building id from the source layer.
    pub building: i64,
    pub kind: UnitKind,
    pub x: Fixed6,
    pub y: Fixed6,
}

impl Record for CheckinRecord {
    const KIND: LogKind = LogKind::Checkin;
    const TAG: &'static str = "polchk/1";
    const COLUMNS: &'static [&'static str] = &["tick", "agent", "unit", "building", "kind", "x", "y"];

    fn write_line(&self, out: &mut String) {
        let _ = write!(out, "{}\t{}\t{}\t{}\t{}\t{}\t{}", self.tick, self.agent, self.unit, self.building, self.kind, self.x, self.y);
    }

    fn parse_fields(f: &[&str]) -> Result<Self, String> {
        Ok(Self {
            tick: int(f[0], "tick")?,
            agent: int(f[1], "agent")?,
            unit: int(f[2], "unit")?,
            building: int(f[3], "building")?,
            kind: f[4].parse().map_err(|e| format!("kind: {e}"))?,
            x: fixed(f[5], "x")?,
            y: fixed(f[6], "y")?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateRecord {
    pub tick: u64,
    pub agent: AgentId,
    pub hunger: Fixed6,
    pub energy: Fixed6,
    pub social: Fixed6,
    pub balance_cents: Cents,
    pub mode: Activity,
}

impl Record for StateRecord {
    const KIND: LogKind = LogKind::State;
    const TAG: &'static str = "polstate/1";
    const COLUMNS: &'static [&'static str] = &["tick", "agent", "hunger", "energy", "social", "balance_cents", "mode"];

    fn write_line(&self, out: &mut String) {
        let _ = write!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.tick, self.agent, self.hunger, self.energy, self.social, self.balance_cents, self.mode
        );
    }

    fn parse_fields(f: &[&str]) -> Result<Self, String> {
        Ok(Self {
            tick: int(f[0], "tick")?,
            agent: int(f[1], "agent")?,
            hunger: fixed(f[2], "hunger")?,
            energy: fixed(f[3], "energy")?,
            social: fixed(f[4], "social")?,
            balance_cents: int(f[5], "balance_cents")?,
            mode: f[6].parse().map_err(|e| format!("mode: {e}"))?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SocialEdgeRecord {
    pub day: u64,
    pub agent_a: AgentId,
    pub agent_b: AgentId,
    pub weight: Fixed6,
}

impl Record for SocialEdgeRecord {
    const KIND: LogKind = LogKind::Social;
    const TAG: &'static str = "polsoc/1";
    const COLUMNS: &'static [&'static str] = &["day", "agent_a", "agent_b", "weight"];

    fn write_line(&self, out: &mut String) {
        let _ = write!(out, "{}\t{}\t{}\t{}", self.day, self.agent_a, self.agent_b, self.weight);
    }

    fn parse_fields(f: &[&str]) -> Result<Self, String> {
        let r = Self { day: int(f[0], "day")?, agent_a: int(f[1], "agent_a")?, agent_b: int(f[2], "agent_b")?, weight: fixed(f[3], "weight")? };
        if r.agent_a >= r.agent_b {
            return Err(format!("agent_a {} must be below agent_b {}", r.agent_a, r.agent_b));
        }
        Ok(r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relocation {
    Home,
    Job,
}

/// A home or job switch from re-evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RelocationRecord {
    pub tick: u64,
    pub agent: AgentId,
    pub what: Relocation,
    pub from: UnitId,
    pub to: UnitId,
}

impl Record for RelocationRecord {
    const KIND: LogKind = LogKind::Relocation;
    const TAG: &'static str = "polreloc/1";
    const COLUMNS: &'static [&'static str] = &["tick", "agent", "what", "from", "to"];

    fn write_line(&self, out: &mut String) {
        let what = match self.what {
            Relocation::Home => "home",
            Relocation::Job => "job",
        };
        let _ = write!(out, "{}\t{}\t{}\t{}\t{}", self.tick, self.agent, what, self.from, self.to);
    }

    fn parse_fields(f: &[&str]) -> Result<Self, String> {
        let what = match f[2] {
            "home" => Relocation::Home,
            "job" => Relocation::Job,
            other => return Err(format!("what: unknown value `{other}`")),
        };
        Ok(Self { tick: int(f[0], "tick")?, agent: int(f[1], "agent")?, what, from: int(f[3], "from")?, to: int(f[4], "to")? })
    }
}
