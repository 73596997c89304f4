//! Undirected walkway graph.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use super::geometry::{BBox, Point};
use super::index::GridIndex;
use super::MapError;

pub type NodeId = u32;

/// Edge lengths may undercut the straight-line distance by at most this much.
pub const LENGTH_SLACK_M: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub u: NodeId,
    pub v: NodeId,
    pub length: f64,
}

#[derive(Debug, Clone)]
pub struct WalkwayGraph {
    nodes: Vec<Point>,
    /// Canonical edge list, `u < v`, sorted by `(u, v)`.
    edges: Vec<Edge>,
    offsets: Vec<u32>,
    adjacency: Vec<(NodeId, f64)>,
    index: Option<GridIndex>,
}

/// Counts of clean-up steps applied while building a graph.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BuildNotes {
    pub isolated_nodes_removed: usize,
    pub duplicate_edges_merged: usize,
    pub self_loops_dropped: usize,
}

impl WalkwayGraph {
    /// Builds a graph from explicit parts. Duplicate edges keep their first
    /// occurrence; self-loops and lengths shorter than the endpoint distance
    /// are rejected.
    pub fn from_parts(nodes: Vec<Point>, edges: impl IntoIterator<Item = Edge>) -> Result<(Self, BuildNotes), MapError> {
        let mut notes = BuildNotes::default();
        let mut seen: HashMap<(NodeId, NodeId), ()> = HashMap::new();
        let mut canonical = Vec::new();
        for e in edges {
            let n = nodes.len() as NodeId;
            if e.u >= n || e.v >= n {
                return Err(MapError::Graph(format!("edge ({}, {}) references a missing node", e.u, e.v)));
            }
            if e.u == e.v {
                return Err(MapError::Graph(format!("self-loop at node {}", e.u)));
            }
            let straight = nodes[e.u as usize].dist(nodes[e.v as usize]);
            if !(e.length.is_finite() && e.length >= straight - LENGTH_SLACK_M) {
                return Err(MapError::Graph(format!(
                    "edge ({}, {}) length {} is shorter than its endpoint distance {}",
                    e.u, e.v, e.length, straight
                )));
            }
            let key = (e.u.min(e.v), e.u.max(e.v));
            if seen.insert(key, ()).is_some() {
                notes.duplicate_edges_merged += 1;
                continue;
            }
            canonical.push(Edge { u: key.0, v: key.1, length: e.length });
        }
        canonical.sort_by_key(|e| (e.u, e.v));

        let mut degree = vec![0u32; nodes.len()];
        for e in &canonical {
            degree[e.u as usize] += 1;
            degree[e.v as usize] += 1;
        }
        let mut offsets = Vec::with_capacity(nodes.len() + 1);
        offsets.push(0u32);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut fill = offsets.clone();
        let mut adjacency = vec![(0, 0.0); canonical.len() * 2];
        for e in &canonical {
            adjacency[fill[e.u as usize] as usize] = (e.v, e.length);
            fill[e.u as usize] += 1;
            adjacency[fill[e.v as usize] as usize] = (e.u, e.length);
            fill[e.v as usize] += 1;
        }
        for i in 0..nodes.len() {
            adjacency[offsets[i] as usize..offsets[i + 1] as usize].sort_by_key(|x| x.0);
        }
        let index = BBox::of(nodes.iter().copied())
            .map(|bbox| GridIndex::build(bbox, nodes.iter().enumerate().map(|(i, p)| (i as u32, *p))));
        Ok((WalkwayGraph { nodes, edges: canonical, offsets, adjacency, index }, notes))
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn point(&self, node: NodeId) -> Point {
        self.nodes[node as usize]
    }

    pub fn contains_node(&self, node: NodeId) -> bool {
        (node as usize) < self.nodes.len()
    }

    /// Neighbours of `node` with edge lengths, ascending by neighbour id.
    pub fn neighbors(&self, node: NodeId) -> &[(NodeId, f64)] {
        let i = node as usize;
        &self.adjacency[self.offsets[i] as usize..self.offsets[i + 1] as usize]
    }

    pub fn edge_length(&self, a: NodeId, b: NodeId) -> Option<f64> {
        let nb = self.neighbors(a);
        nb.binary_search_by_key(&b, |x| x.0).ok().map(|i| nb[i].1)
    }

    /// Sizes of connected components, largest first.
    pub fn component_sizes(&self) -> Vec<usize> {
        let mut label = vec![u32::MAX; self.nodes.len()];
        let mut sizes = Vec::new();
        let mut stack = Vec::new();
        for start in 0..self.nodes.len() {
            if label[start] != u32::MAX {
                continue;
            }
            let comp = sizes.len() as u32;
            label[start] = comp;
            stack.push(start as NodeId);
            let mut size = 0;
            while let Some(n) = stack.pop() {
                size += 1;
                for &(m, _) in self.neighbors(n) {
                    if label[m as usize] == u32::MAX {
                        label[m as usize] = comp;
                        stack.push(m);
                    }
                }
            }
            sizes.push(size);
        }
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        sizes
    }

    /// Node closest to `p`; ties go to the smallest id.
    pub fn nearest_node(&self, p: Point) -> Result<NodeId, MapError> {
        let index = self.index.as_ref().ok_or(MapError::EmptyGraph)?;
        index.nearest(p, 1).first().map(|&(_, id)| id).ok_or(MapError::EmptyGraph)
    }

    /// Shortest-path distance from `source` to every node (`f64::INFINITY`
    /// when unreachable).
    pub fn distances_from(&self, source: NodeId) -> Vec<f64> {
        let mut dist = vec![f64::INFINITY; self.nodes.len()];
        let mut heap = BinaryHeap::new();
        dist[source as usize] = 0.0;
        heap.push(MinEntry { cost: 0.0, node: source });
        while let Some(MinEntry { cost, node }) = heap.pop() {
            if cost > dist[node as usize] {
                continue;
            }
            for &(next, len) in self.neighbors(node) {
                let candidate = cost + len;
                if candidate < dist[next as usize] {
                    dist[next as usize] = candidate;
                    heap.push(MinEntry { cost: candidate, node: next });
                }
            }
        }
        dist
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct MinEntry {
    cost: f64,
    node: NodeId,
}

impl Eq for MinEntry {}

impl Ord for MinEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.cost.total_cmp(&self.cost).then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for MinEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Accumulates polyline vertices into graph nodes.
///
/// Vertices are merged first by exact coordinate match, then with any earlier
/// node within the snap tolerance (the smallest such id wins).
#[derive(Debug)]
pub struct GraphBuilder {
    tolerance: f64,
    points: Vec<Point>,
    exact: HashMap<(u64, u64), NodeId>,
    buckets: HashMap<(i64, i64), Vec<NodeId>>,
    edges: Vec<(NodeId, NodeId)>,
    self_loops: usize,
}

impl GraphBuilder {
    pub fn new(snap_tolerance: f64) -> Self {
        Self {
            tolerance: snap_tolerance,
            points: Vec::new(),
            exact: HashMap::new(),
            buckets: HashMap::new(),
            edges: Vec::new(),
            self_loops: 0,
        }
    }

    fn bucket(&self, p: Point) -> (i64, i64) {
        let size = self.tolerance.max(1e-9);
        ((p.x / size).floor() as i64, (p.y / size).floor() as i64)
    }

    pub fn add_point(&mut self, p: Point) -> NodeId {
        let key = (p.x.to_bits(), p.y.to_bits());
        if let Some(&id) = self.exact.get(&key) {
            return id;
        }
        let (bx, by) = self.bucket(p);
        let tol2 = self.tolerance * self.tolerance;
        let mut best: Option<NodeId> = None;
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(ids) = self.buckets.get(&(bx + dx, by + dy)) {
                    for &id in ids {
                        if self.points[id as usize].dist2(p) <= tol2 && best.is_none_or(|b| id < b) {
                            best = Some(id);
                        }
                    }
                }
            }
        }
        let id = match best {
            Some(id) => id,
            None => {
                let id = self.points.len() as NodeId;
                self.points.push(p);
                self.buckets.entry((bx, by)).or_default().push(id);
                id
            }
        };
        self.exact.insert(key, id);
        id
    }

    pub fn add_polyline(&mut self, vertices: &[Point]) {
        let ids: Vec<NodeId> = vertices.iter().map(|&p| self.add_point(p)).collect();
        for pair in ids.windows(2) {
            if pair[0] == pair[1] {
                self.self_loops += 1;
            } else {
                self.edges.push((pair[0], pair[1]));
            }
        }
    }

    /// Drops nodes without edges, renumbers the rest in first-seen order, and
    /// uses straight-line lengths for every edge.
    pub fn finish(self) -> Result<(WalkwayGraph, BuildNotes), MapError> {
        let mut used = vec![false; self.points.len()];
        for &(a, b) in &self.edges {
            used[a as usize] = true;
            used[b as usize] = true;
        }
        let mut remap = vec![NodeId::MAX; self.points.len()];
        let mut nodes = Vec::new();
        for (i, p) in self.points.iter().enumerate() {
            if used[i] {
                remap[i] = nodes.len() as NodeId;
                nodes.push(*p);
            }
        }
        let isolated = self.points.len() - nodes.len();
        let edges: Vec<Edge> = self
            .edges
            .iter()
            .map(|&(a, b)| {
                let (u, v) = (remap[a as usize], remap[b as usize]);
                Edge { u, v, length: nodes[u as usize].dist(nodes[v as usize]) }
            })
            .collect();
        let (graph, mut notes) = WalkwayGraph::from_parts(nodes, edges)?;
        notes.isolated_nodes_removed = isolated;
        notes.self_loops_dropped = self.self_loops;
        Ok((graph, notes))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_stream;

    fn square(builder: &mut GraphBuilder, x0: f64) {
        let pts = [
            Point::new(x0, 0.0),
            Point::new(x0 + 10.0, 0.0),
            Point::new(x0 + 10.0, 10.0),
            Point::new(x0, 10.0),
            Point::new(x0, 0.0),
        ];
        builder.add_polyline(&pts);
    }

    #[test]
    fn two_squares_are_two_components() {
        let mut b = GraphBuilder::new(0.5);
        square(&mut b, 0.0);
        square(&mut b, 100.0);
        let (g, _) = b.finish().unwrap();
        // Independent oracle: union-find over the edge list.
        let mut parent: Vec<usize> = (0..g.node_count()).collect();
        fn find(p: &mut Vec<usize>, x: usize) -> usize {
            if p[x] != x {
                let r = find(p, p[x]);
                p[x] = r;
            }
            p[x]
        }
        for e in g.edges() {
            let (a, b) = (find(&mut parent, e.u as usize), find(&mut parent, e.v as usize));
            parent[a] = b;
        }
        let mut counts = std::collections::BTreeMap::new();
        for i in 0..g.node_count() {
            *counts.entry(find(&mut parent, i)).or_insert(0) += 1;
        }
        let mut oracle: Vec<usize> = counts.into_values().collect();
        oracle.sort_unstable_by(|a, b| b.cmp(a));
        assert_eq!(oracle, vec![4, 4]);
        assert_eq!(g.component_sizes(), oracle);
    }

    #[test]
    fn snapping_merges_close_vertices() {
        let mut b = GraphBuilder::new(0.5);
        b.add_polyline(&[Point::new(0.0, 0.0), Point::new(10.0, 0.0)]);
        b.add_polyline(&[Point::new(10.3, 0.2), Point::new(20.0, 0.0)]);
        let (g, _) = b.finish().unwrap();
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.component_sizes(), vec![3]);
    }

    #[test]
    fn duplicate_edges_merge_with_a_note() {
        let mut b = GraphBuilder::new(0.5);
        b.add_polyline(&[Point::new(0.0, 0.0), Point::new(10.0, 0.0)]);
        b.add_polyline(&[Point::new(10.0, 0.0), Point::new(0.0, 0.0)]);
        b.add_polyline(&[Point::new(10.0, 0.0), Point::new(10.0, 7.0)]);
        let before = 3;
        let (g, notes) = b.finish().unwrap();
        assert_eq!(notes.duplicate_edges_merged, 1);
        assert_eq!(g.edge_count(), before - notes.duplicate_edges_merged);
        assert_eq!(g.edge_length(0, 1), Some(10.0));
        assert_eq!(g.edge_length(1, 0), Some(10.0));
    }

    #[test]
    fn isolated_points_dropped() {
        let mut b = GraphBuilder::new(0.5);
        b.add_point(Point::new(50.0, 50.0));
        b.add_polyline(&[Point::new(0.0, 0.0), Point::new(1.0, 0.0)]);
        b.add_polyline(&[Point::new(7.0, 7.0), Point::new(7.1, 7.1)]);
        let (g, notes) = b.finish().unwrap();
        assert_eq!(g.node_count(), 2);
        assert_eq!(notes.isolated_nodes_removed, 2);
        assert_eq!(notes.self_loops_dropped, 1);
    }

    #[test]
    fn rejects_short_edges_and_loops() {
        let nodes = vec![Point::new(0.0, 0.0), Point::new(3.0, 4.0)];
        assert!(WalkwayGraph::from_parts(nodes.clone(), [Edge { u: 0, v: 1, length: 4.9 }]).is_err());
        assert!(WalkwayGraph::from_parts(nodes.clone(), [Edge { u: 0, v: 0, length: 1.0 }]).is_err());
        assert!(WalkwayGraph::from_parts(nodes, [Edge { u: 0, v: 1, length: 5.0 }]).is_ok());
    }

    #[test]
    fn nearest_node_matches_scan() {
        let mut rng = derive_stream(11, "nodes");
        for _ in 0..20 {
            let nodes: Vec<Point> = (0..5).map(|_| Point::new(rng.unit_f64() * 100.0, rng.unit_f64() * 100.0)).collect();
            let (g, _) = WalkwayGraph::from_parts(nodes.clone(), []).unwrap();
            let p = Point::new(rng.unit_f64() * 120.0 - 10.0, rng.unit_f64() * 120.0 - 10.0);
            let scan = (0..nodes.len())
                .min_by(|&a, &b| p.dist2(nodes[a]).total_cmp(&p.dist2(nodes[b])).then(a.cmp(&b)))
                .unwrap();
            assert_eq!(g.nearest_node(p).unwrap(), scan as NodeId);
        }
    }

    #[test]
    fn nearest_node_exact_hit_and_ties() {
        let mut nodes = vec![Point::new(500.0, 500.0); 8];
        nodes[7] = Point::new(-1.0, 0.0);
        nodes[3] = Point::new(1.0, 0.0);
        nodes[5] = Point::new(40.0, 40.0);
        let (g, _) = WalkwayGraph::from_parts(nodes, []).unwrap();
        assert_eq!(g.nearest_node(Point::new(0.0, 0.0)).unwrap(), 3);
        assert_eq!(g.nearest_node(Point::new(40.0, 40.0)).unwrap(), 5);
        let (empty, _) = WalkwayGraph::from_parts(vec![], []).unwrap();
        assert!(matches!(empty.nearest_node(Point::new(0.0, 0.0)), Err(MapError::EmptyGraph)));
    }
}
