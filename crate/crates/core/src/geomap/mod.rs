//! Map layers, the walkway graph, and the immutable [`WorldMap`].
//!
//! Everything is in local planar meters produced by an equirectangular
//! projection about the map centre. Units (apartments, shops, ...) are the
//! places agents occupy; each one is anchored to its nearest walkway node and
//! agents cover the unit-to-anchor segment instantly.

pub mod geometry;
pub mod graph;
pub mod index;
pub mod ingest;
pub mod serial;
pub mod synth;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

pub use geometry::{BBox, Point, Projection};
pub use graph::{BuildNotes, Edge, GraphBuilder, NodeId, WalkwayGraph};
pub use index::GridIndex;
pub use ingest::{ingest_map, IngestConfig};

pub type UnitId = u32;
/// Integer currency in cents.
pub type Cents = i64;

#[derive(Debug, Error)]
pub enum MapError {
    #[error("{layer} layer, feature {feature}: {message}")]
    Parse { layer: &'static str, feature: usize, message: String },
    #[error("map has no {0} buildings")]
    MissingKind(UnitKind),
    #[error("walkway graph is disconnected, component sizes {0:?}")]
    Disconnected(Vec<usize>),
    #[error("walkway graph is empty")]
    EmptyGraph,
    #[error("invalid walkway graph: {0}")]
    Graph(String),
    #[error("map validation failed: {}", join_issues(.0))]
    Validation(Vec<Issue>),
    #[error("malformed map document, line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

fn join_issues(issues: &[Issue]) -> String {
    issues.iter().map(|i| i.to_string()).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum UnitKind {
    Residential,
    Workplace,
    Restaurant,
    Recreation,
}

impl UnitKind {
    pub const ALL: [UnitKind; 4] = [UnitKind::Residential, UnitKind::Workplace, UnitKind::Restaurant, UnitKind::Recreation];

    pub fn as_str(self) -> &'static str {
        match self {
            UnitKind::Residential => "residential",
            UnitKind::Workplace => "workplace",
            UnitKind::Restaurant => "restaurant",
            UnitKind::Recreation => "recreation",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for UnitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for UnitKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        UnitKind::ALL.into_iter().find(|k| k.as_str() == s).ok_or_else(|| format!("unknown unit kind `{s}`"))
    }
}

/// The per-unit price attribute; the variant always matches the unit kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Economy {
    Rent { per_day: Cents },
    Wage { per_tick: Cents },
    Meal { price: Cents },
    Free,
}

impl Economy {
    /// Zero-valued attribute of the right shape for `kind`.
    pub fn placeholder(kind: UnitKind) -> Self {
        match kind {
            UnitKind::Residential => Economy::Rent { per_day: 0 },
            UnitKind::Workplace => Economy::Wage { per_tick: 0 },
            UnitKind::Restaurant => Economy::Meal { price: 0 },
            UnitKind::Recreation => Economy::Free,
        }
    }

    fn matches(self, kind: UnitKind) -> bool {
        matches!(
            (self, kind),
            (Economy::Rent { .. }, UnitKind::Residential)
                | (Economy::Wage { .. }, UnitKind::Workplace)
                | (Economy::Meal { .. }, UnitKind::Restaurant)
                | (Economy::Free, UnitKind::Recreation)
        )
    }

    fn amount(self) -> Cents {
        match self {
            Economy::Rent { per_day: v } | Economy::Wage { per_tick: v } | Economy::Meal { price: v } => v,
            Economy::Free => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Building {
    pub id: i64,
    /// Simple polygon, at least three vertices, no closing duplicate.
    pub footprint: Vec<Point>,
    pub kind: UnitKind,
    pub source_tags: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuildingUnit {
    pub id: UnitId,
    /// Index into [`WorldMap::buildings`].
    pub building: u32,
    pub location: Point,
    pub kind: UnitKind,
    pub economy: Economy,
}

impl BuildingUnit {
    pub fn rent_per_day(&self) -> Option<Cents> {
        match self.economy {
            Economy::Rent { per_day } => Some(per_day),
            _ => None,
        }
    }

    pub fn wage_per_tick(&self) -> Option<Cents> {
        match self.economy {
            Economy::Wage { per_tick } => Some(per_tick),
            _ => None,
        }
    }

    pub fn meal_price(&self) -> Option<Cents> {
        match self.economy {
            Economy::Meal { price } => Some(price),
            _ => None,
        }
    }
}

/// A finding from [`validate_map`].
#[derive(Debug, Clone, PartialEq)]
pub enum Issue {
    Disconnected(Vec<usize>),
    EmptyGraph,
    MissingKind(UnitKind),
    UnitOutsideFootprint(UnitId),
    UnitAttributeMismatch(UnitId),
    AnchorMismatch { unit: UnitId, anchor: NodeId, nearest: NodeId },
    IsolatedNodesRemoved(usize),
    DuplicateEdgesMerged(usize),
    SelfLoopsDropped(usize),
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Issue::Disconnected(sizes) => write!(f, "walkway graph disconnected, component sizes {sizes:?}"),
            Issue::EmptyGraph => write!(f, "walkway graph is empty"),
            Issue::MissingKind(kind) => write!(f, "no {kind} units"),
            Issue::UnitOutsideFootprint(id) => write!(f, "unit {id} lies outside its building footprint"),
            Issue::UnitAttributeMismatch(id) => write!(f, "unit {id} has a price attribute that does not match its kind"),
            Issue::AnchorMismatch { unit, anchor, nearest } => {
                write!(f, "unit {unit} anchored at node {anchor} but nearest node is {nearest}")
            }
            Issue::IsolatedNodesRemoved(n) => write!(f, "{n} isolated walkway nodes removed"),
            Issue::DuplicateEdgesMerged(n) => write!(f, "{n} duplicate walkway edges merged"),
            Issue::SelfLoopsDropped(n) => write!(f, "{n} zero-length walkway segments dropped"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub errors: Vec<Issue>,
    pub warnings: Vec<Issue>,
    /// Largest unit-to-anchor distance, meters.
    pub anchor_teleport_bound: f64,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.errors.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "valid = {}", self.is_valid())?;
        writeln!(f, "anchor_teleport_bound_m = {:.6}", self.anchor_teleport_bound)?;
        for e in &self.errors {
            writeln!(f, "error = {e}")?;
        }
        for w in &self.warnings {
            writeln!(f, "warning = {w}")?;
        }
        Ok(())
    }
}

/// The immutable simulation environment.
#[derive(Debug, Clone)]
pub struct WorldMap {
    projection: Projection,
    buildings: Vec<Building>,
    units: Vec<BuildingUnit>,
    graph: WalkwayGraph,
    notes: BuildNotes,
    anchors: Vec<NodeId>,
    by_kind: [Vec<UnitId>; 4],
    kind_index: [Option<GridIndex>; 4],
    teleport_bound: f64,
}

impl WorldMap {
    /// Assembles and validates a map. Units must be numbered `0..n` in order.
    pub fn new(
        projection: Projection,
        buildings: Vec<Building>,
        units: Vec<BuildingUnit>,
        graph: WalkwayGraph,
        notes: BuildNotes,
    ) -> Result<Self, MapError> {
        let map = Self::assemble(projection, buildings, units, graph, notes)?;
        let report = validate_map(&map);
        if report.is_valid() {
            return Ok(map);
        }
        let errors = report.errors;
        if let Some(Issue::MissingKind(kind)) = errors.iter().find(|e| matches!(e, Issue::MissingKind(_))) {
            return Err(MapError::MissingKind(*kind));
        }
        if let Some(Issue::Disconnected(sizes)) = errors.iter().find(|e| matches!(e, Issue::Disconnected(_))) {
            return Err(MapError::Disconnected(sizes.clone()));
        }
        if errors.contains(&Issue::EmptyGraph) {
            return Err(MapError::EmptyGraph);
        }
        Err(MapError::Validation(errors))
    }

    /// Builds derived structures (anchors, per-kind indexes) without validating.
    pub(crate) fn assemble(
        projection: Projection,
        buildings: Vec<Building>,
        units: Vec<BuildingUnit>,
        graph: WalkwayGraph,
        notes: BuildNotes,
    ) -> Result<Self, MapError> {
        for (i, u) in units.iter().enumerate() {
            if u.id as usize != i {
                return Err(MapError::Format { line: 0, message: format!("unit at position {i} has id {}", u.id) });
            }
            if u.building as usize >= buildings.len() {
                return Err(MapError::Format { line: 0, message: format!("unit {} references a missing building", u.id) });
            }
        }
        let anchors = if graph.node_count() == 0 {
            Vec::new()
        } else {
            units.iter().map(|u| graph.nearest_node(u.location)).collect::<Result<Vec<_>, _>>()?
        };
        let teleport_bound =
            units.iter().zip(&anchors).map(|(u, &a)| u.location.dist(graph.point(a))).fold(0.0, f64::max);
        let mut by_kind: [Vec<UnitId>; 4] = Default::default();
        for u in &units {
            by_kind[u.kind.index()].push(u.id);
        }
        let extent = BBox::of(units.iter().map(|u| u.location));
        let kind_index = std::array::from_fn(|k| {
            extent.filter(|_| !by_kind[k].is_empty()).map(|bbox| {
                GridIndex::build(bbox, by_kind[k].iter().map(|&id| (id, units[id as usize].location)))
            })
        });
        Ok(WorldMap { projection, buildings, units, graph, notes, anchors, by_kind, kind_index, teleport_bound })
    }

    pub fn projection(&self) -> &Projection {
        &self.projection
    }

    pub fn buildings(&self) -> &[Building] {
        &self.buildings
    }

    pub fn units(&self) -> &[BuildingUnit] {
        &self.units
    }

    pub fn unit(&self, id: UnitId) -> &BuildingUnit {
        &self.units[id as usize]
    }

    pub fn building_of(&self, id: UnitId) -> &Building {
        &self.buildings[self.units[id as usize].building as usize]
    }

    pub fn graph(&self) -> &WalkwayGraph {
        &self.graph
    }

    pub fn build_notes(&self) -> BuildNotes {
        self.notes
    }

    pub fn anchor(&self, unit: UnitId) -> NodeId {
        self.anchors[unit as usize]
    }

    /// Unit ids of one kind, ascending.
    pub fn units_of_kind(&self, kind: UnitKind) -> &[UnitId] {
        &self.by_kind[kind.index()]
    }

    /// Largest unit-to-anchor distance in meters.
    pub fn anchor_teleport_bound(&self) -> f64 {
        self.teleport_bound
    }

    pub fn rent_of(&self, unit: UnitId) -> Cents {
        self.units[unit as usize].rent_per_day().unwrap_or(0)
    }

    pub fn wage_of(&self, unit: UnitId) -> Cents {
        self.units[unit as usize].wage_per_tick().unwrap_or(0)
    }

    pub fn meal_price_of(&self, unit: UnitId) -> Cents {
        self.units[unit as usize].meal_price().unwrap_or(0)
    }
}

/// The `k` units of `kind` closest to `p` by straight-line distance, ascending
/// by distance then id.
pub fn euclidean_nearest_unit(map: &WorldMap, p: Point, kind: UnitKind, k: usize) -> Vec<UnitId> {
    match &map.kind_index[kind.index()] {
        Some(index) => index.nearest(p, k).into_iter().map(|(_, id)| id).collect(),
        None => Vec::new(),
    }
}

/// The unit of `kind` whose anchor is closest to `from_node` along the walkway
/// network (ties by unit id). Runs a full single-source search, which is the
/// cost profile of network-distance place selection.
pub fn network_nearest_unit(map: &WorldMap, from_node: NodeId, kind: UnitKind) -> Option<UnitId> {
    let candidates = map.units_of_kind(kind);
    if candidates.is_empty() {
        return None;
    }
    let dist = map.graph.distances_from(from_node);
    candidates
        .iter()
        .map(|&u| (dist[map.anchor(u) as usize], u))
        .filter(|(d, _)| d.is_finite())
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        .map(|(_, u)| u)
}

/// Checks every structural invariant of a map.
pub fn validate_map(map: &WorldMap) -> ValidationReport {
    let mut report = ValidationReport { anchor_teleport_bound: map.teleport_bound, ..Default::default() };
    let graph = &map.graph;
    if graph.node_count() == 0 {
        report.errors.push(Issue::EmptyGraph);
    } else {
        let sizes = graph.component_sizes();
        if sizes.len() > 1 {
            report.errors.push(Issue::Disconnected(sizes));
        }
    }
    for kind in UnitKind::ALL {
        if !map.buildings.iter().any(|b| b.kind == kind) || map.units_of_kind(kind).is_empty() {
            report.errors.push(Issue::MissingKind(kind));
        }
    }
    for u in &map.units {
        let building = &map.buildings[u.building as usize];
        if !geometry::contains(&building.footprint, u.location) {
            report.errors.push(Issue::UnitOutsideFootprint(u.id));
        }
        if u.kind != building.kind || !u.economy.matches(u.kind) || u.economy.amount() < 0 {
            report.errors.push(Issue::UnitAttributeMismatch(u.id));
        }
    }
    if graph.node_count() > 0 {
        // Exhaustive check of every anchor against a linear scan.
        let nodes = graph.nodes();
        for u in &map.units {
            let mut best = 0usize;
            let mut best_d = f64::INFINITY;
            for (i, n) in nodes.iter().enumerate() {
                let d = u.location.dist2(*n);
                if d < best_d {
                    best_d = d;
                    best = i;
                }
            }
            let anchor = map.anchors[u.id as usize];
            if anchor as usize != best {
                report.errors.push(Issue::AnchorMismatch { unit: u.id, anchor, nearest: best as NodeId });
            }
        }
    }
    let notes = map.notes;
    if notes.isolated_nodes_removed > 0 {
        report.warnings.push(Issue::IsolatedNodesRemoved(notes.isolated_nodes_removed));
    }
    if notes.duplicate_edges_merged > 0 {
        report.warnings.push(Issue::DuplicateEdgesMerged(notes.duplicate_edges_merged));
    }
    if notes.self_loops_dropped > 0 {
        report.warnings.push(Issue::SelfLoopsDropped(notes.self_loops_dropped));
    }
    report
}

/// Side of the grid spacing used to place units, meters.
fn unit_spacing(unit_area: f64) -> f64 {
    unit_area.sqrt()
}

/// Splits a building into `max(1, floor(area / unit_area))` units on a regular
/// grid clipped to the footprint. Units carry a zero-valued price attribute of
/// the building's kind and local ids `0..n`.
pub fn subdivide_building(building: &Building, unit_area: f64) -> Vec<BuildingUnit> {
    assert!(unit_area > 0.0, "unit_area must be positive");
    let ring = &building.footprint;
    let count = ((geometry::area(ring) / unit_area).floor() as usize).max(1);
    let locations = if count == 1 { vec![geometry::interior_point(ring)] } else { grid_locations(ring, unit_area, count) };
    locations
        .into_iter()
        .enumerate()
        .map(|(i, location)| BuildingUnit {
            id: i as UnitId,
            building: 0,
            location,
            kind: building.kind,
            economy: Economy::placeholder(building.kind),
        })
        .collect()
}

fn grid_locations(ring: &[Point], unit_area: f64, count: usize) -> Vec<Point> {
    let bbox = BBox::of(ring.iter().copied()).expect("non-empty footprint");
    let mut spacing = unit_spacing(unit_area);
    // Refine the grid a few times for irregular shapes before giving up.
    for _ in 0..4 {
        let nx = ((bbox.width() / spacing).ceil() as usize).max(1);
        let ny = ((bbox.height() / spacing).ceil() as usize).max(1);
        let mut inside = Vec::new();
        for j in 0..ny {
            for i in 0..nx {
                let p = Point::new(
                    bbox.min.x + (i as f64 + 0.5) * bbox.width() / nx as f64,
                    bbox.min.y + (j as f64 + 0.5) * bbox.height() / ny as f64,
                );
                if geometry::contains(ring, p) {
                    inside.push(p);
                }
            }
        }
        if inside.len() >= count {
            // Evenly spaced picks keep units spread over the footprint.
            return (0..count).map(|i| inside[i * inside.len() / count]).collect();
        }
        spacing *= 0.5;
    }
    vec![geometry::interior_point(ring); count]
}
