//! Walkway routing and per-tick movement.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap, VecDeque};
use std::sync::Arc;

use thiserror::Error;

use crate::geomap::{NodeId, Point, UnitId, WalkwayGraph, WorldMap};

/// Default capacity of [`RouteCache`].
pub const ROUTE_CACHE_CAPACITY: usize = 65_536;

/// Heuristic scale. Keeps the straight-line estimate strictly below any
/// path length even after rounding, so A* stays exact.
const HEURISTIC_SCALE: f64 = 1.0 - 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RouteError {
    #[error("node {0} is not in the walkway graph")]
    UnknownNode(NodeId),
    #[error("no walkway path from node {from} to node {to}")]
    Unreachable { from: NodeId, to: NodeId },
}

/// A node path with cumulative arc lengths.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub nodes: Vec<NodeId>,
    /// `cum[i]` is the distance from `nodes[0]` to `nodes[i]`.
    pub cum: Vec<f64>,
}

impl Path {
    pub fn length(&self) -> f64 {
        *self.cum.last().expect("paths are non-empty")
    }

    /// Point at arc length `offset`, clamped to the path ends.
    pub fn point_at(&self, graph: &WalkwayGraph, offset: f64) -> Point {
        if self.nodes.len() == 1 || offset <= 0.0 {
            return graph.point(self.nodes[0]);
        }
        if offset >= self.length() {
            return graph.point(*self.nodes.last().unwrap());
        }
        // First index whose cumulative length exceeds the offset.
        let i = self.cum.partition_point(|&c| c <= offset).clamp(1, self.nodes.len() - 1);
        let (a, b) = (graph.point(self.nodes[i - 1]), graph.point(self.nodes[i]));
        let span = self.cum[i] - self.cum[i - 1];
        if span <= 0.0 {
            return b;
        }
        a.lerp(b, (offset - self.cum[i - 1]) / span)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Route {
    pub path: Arc<Path>,
    pub origin_unit: UnitId,
    pub destination_unit: UnitId,
}

impl Route {
    pub fn length(&self) -> f64 {
        self.path.length()
    }
}

#[derive(Clone, Copy, PartialEq)]
struct Frontier {
    f: f64,
    g: f64,
    node: NodeId,
}

impl Eq for Frontier {}

impl Ord for Frontier {
    // Reversed: BinaryHeap is a max-heap and we pop the smallest (f, g, node).
    fn cmp(&self, other: &Self) -> Ordering {
        other.f.total_cmp(&self.f).then(other.g.total_cmp(&self.g)).then(other.node.cmp(&self.node))
    }
}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Shortest path by A* with a straight-line heuristic. Frontier ties pop the
/// smallest `(f, g, node)`; a node's predecessor only changes on a strictly
/// shorter distance.
pub fn plan_route(g: &WalkwayGraph, from: NodeId, to: NodeId) -> Result<Path, RouteError> {
    for n in [from, to] {
        if !g.contains_node(n) {
            return Err(RouteError::UnknownNode(n));
        }
    }
    if from == to {
        return Ok(Path { nodes: vec![from], cum: vec![0.0] });
    }
    let target = g.point(to);
    let h = |n: NodeId| g.point(n).dist(target) * HEURISTIC_SCALE;
    let n = g.node_count();
    let mut dist = vec![f64::INFINITY; n];
    let mut pred = vec![NodeId::MAX; n];
    let mut heap = BinaryHeap::new();
    dist[from as usize] = 0.0;
    heap.push(Frontier { f: h(from), g: 0.0, node: from });
    while let Some(Frontier { g: cost, node, .. }) = heap.pop() {
        if cost > dist[node as usize] {
            continue;
        }
        if node == to {
            break;
        }
        for &(next, len) in g.neighbors(node) {
            let candidate = cost + len;
            if candidate < dist[next as usize] {
                dist[next as usize] = candidate;
                pred[next as usize] = node;
                heap.push(Frontier { f: candidate + h(next), g: candidate, node: next });
            }
        }
    }
    if !dist[to as usize].is_finite() {
        return Err(RouteError::Unreachable { from, to });
    }
    let mut nodes = vec![to];
    let mut cur = to;
    while cur != from {
        cur = pred[cur as usize];
        nodes.push(cur);
    }
    nodes.reverse();
    // Left-to-right summation; equals the search's own distance label.
    let mut cum = Vec::with_capacity(nodes.len());
    let mut acc = 0.0;
    cum.push(acc);
    for w in nodes.windows(2) {
        acc += g.edge_length(w[0], w[1]).expect("path follows graph edges");
        cum.push(acc);
    }
    Ok(Path { nodes, cum })
}

/// Bounded memo of planned paths keyed by `(from, to)`, FIFO eviction.
#[derive(Debug)]
pub struct RouteCache {
    capacity: usize,
    map: HashMap<(NodeId, NodeId), Arc<Path>>,
    order: VecDeque<(NodeId, NodeId)>,
    hits: u64,
    misses: u64,
}

impl Default for RouteCache {
    fn default() -> Self {
        Self::new(ROUTE_CACHE_CAPACITY)
    }
}

impl RouteCache {
    pub fn new(capacity: usize) -> Self {
        Self { capacity: capacity.max(1), map: HashMap::new(), order: VecDeque::new(), hits: 0, misses: 0 }
    }

    pub fn get(&mut self, g: &WalkwayGraph, from: NodeId, to: NodeId) -> Result<Arc<Path>, RouteError> {
        if let Some(p) = self.map.get(&(from, to)) {
            self.hits += 1;
            return Ok(Arc::clone(p));
        }
        self.misses += 1;
        let path = Arc::new(plan_route(g, from, to)?);
        if self.map.len() >= self.capacity {
            if let Some(old) = self.order.pop_front() {
                self.map.remove(&old);
            }
        }
        self.map.insert((from, to), Arc::clone(&path));
        self.order.push_back((from, to));
        Ok(path)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn stats(&self) -> (u64, u64) {
        (self.hits, self.misses)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Kinematics {
    AtUnit(UnitId),
    OnRoute { route: Route, offset: f64 },
}

impl Kinematics {
    pub fn unit(&self) -> Option<UnitId> {
        match self {
            Kinematics::AtUnit(u) => Some(*u),
            Kinematics::OnRoute { .. } => None,
        }
    }

    pub fn is_on_route(&self) -> bool {
        matches!(self, Kinematics::OnRoute { .. })
    }
}

/// Outcome of [`begin_travel`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Departure {
    /// Already at the destination; nothing changes.
    Stayed,
    /// Both units share an anchor node: arrived without moving along the graph.
    Arrived,
    Departed,
}

/// Starts a trip from the current unit to `dest`.
pub fn begin_travel(
    kin: &mut Kinematics,
    map: &WorldMap,
    cache: &mut RouteCache,
    dest: UnitId,
) -> Result<Departure, RouteError> {
    let Kinematics::AtUnit(current) = *kin else {
        panic!("begin_travel called on an agent that is already travelling");
    };
    if current == dest {
        return Ok(Departure::Stayed);
    }
    let (from, to) = (map.anchor(current), map.anchor(dest));
    if from == to {
        *kin = Kinematics::AtUnit(dest);
        return Ok(Departure::Arrived);
    }
    let path = cache.get(map.graph(), from, to)?;
    *kin = Kinematics::OnRoute { route: Route { path, origin_unit: current, destination_unit: dest }, offset: 0.0 };
    Ok(Departure::Departed)
}

/// Moves a travelling agent `speed * dt` meters; returns true on arrival.
pub fn advance(kin: &mut Kinematics, speed: f64, dt: f64) -> bool {
    let Kinematics::OnRoute { route, offset } = kin else {
        return false;
    };
    *offset += speed * dt.max(0.0);
    if *offset >= route.length() {
        *kin = Kinematics::AtUnit(route.destination_unit);
        return true;
    }
    false
}

pub fn position_of(kin: &Kinematics, map: &WorldMap) -> Point {
    match kin {
        Kinematics::AtUnit(u) => map.unit(*u).location,
        Kinematics::OnRoute { route, offset } => route.path.point_at(map.graph(), *offset),
    }
}
