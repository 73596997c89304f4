//! Co-location social network.

use std::collections::BTreeMap;

use crate::geomap::UnitId;
use crate::needs::AgentId;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SocialParams {
    /// Weight added per co-located tick.
    pub delta_meet: f64,
    /// Fraction of every weight lost per day.
    pub lambda_decay: f64,
    pub friend_threshold: f64,
    pub prune_epsilon: f64,
}

impl Default for SocialParams {
    fn default() -> Self {
        Self { delta_meet: 0.05, lambda_decay: 0.01, friend_threshold: 0.3, prune_epsilon: 0.001 }
    }
}

impl SocialParams {
    pub fn check(&self) -> Result<(), String> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(format!("{name} must be in [0, 1], got {v}"))
            }
        };
        unit("social.delta_meet", self.delta_meet)?;
        unit("social.lambda_decay", self.lambda_decay)?;
        unit("social.friend_threshold", self.friend_threshold)?;
        unit("social.prune_epsilon", self.prune_epsilon)
    }
}

/// Undirected weighted graph over agents `0..n`. Each edge is stored in both
/// endpoint maps, so symmetry holds by construction.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SocialGraph {
    adj: Vec<BTreeMap<AgentId, f64>>,
    edges: usize,
}

impl SocialGraph {
    pub fn new(n_agents: usize) -> Self {
        Self { adj: vec![BTreeMap::new(); n_agents], edges: 0 }
    }

    pub fn agent_count(&self) -> usize {
        self.adj.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges
    }

    pub fn weight(&self, a: AgentId, b: AgentId) -> Option<f64> {
        self.adj.get(a as usize)?.get(&b).copied()
    }

    /// Neighbors of `a` with weights, ascending id.
    pub fn neighbors(&self, a: AgentId) -> impl Iterator<Item = (AgentId, f64)> + '_ {
        self.adj[a as usize].iter().map(|(&b, &w)| (b, w))
    }

    /// Every edge once as `(a, b, weight)` with `a < b`, ascending.
    pub fn edges(&self) -> impl Iterator<Item = (AgentId, AgentId, f64)> + '_ {
        self.adj
            .iter()
            .enumerate()
            .flat_map(|(a, m)| m.range((a as AgentId + 1)..).map(move |(&b, &w)| (a as AgentId, b, w)))
    }

    /// Sets a weight; `None` removes the edge.
    fn set(&mut self, a: AgentId, b: AgentId, w: Option<f64>) {
        debug_assert_ne!(a, b);
        match w {
            Some(w) => {
                if self.adj[a as usize].insert(b, w).is_none() {
                    self.edges += 1;
                }
                self.adj[b as usize].insert(a, w);
            }
            None => {
                if self.adj[a as usize].remove(&b).is_some() {
                    self.edges -= 1;
                }
                self.adj[b as usize].remove(&a);
            }
        }
    }

    /// Strengthens every pair within each group by `delta`, capped at 1.
    pub fn register_colocation<'a>(&mut self, groups: impl IntoIterator<Item = &'a [AgentId]>, delta: f64) {
        if delta <= 0.0 {
            return;
        }
        for group in groups {
            for (i, &a) in group.iter().enumerate() {
                for &b in &group[i + 1..] {
                    if a == b {
                        continue;
                    }
                    let w = (self.weight(a, b).unwrap_or(0.0) + delta).min(1.0);
                    self.set(a, b, Some(w));
                }
            }
        }
    }

    /// Daily decay: every weight scaled by `1 - lambda`, then edges below
    /// `prune_epsilon` removed.
    pub fn decay(&mut self, lambda: f64, prune_epsilon: f64) {
        let keep = 1.0 - lambda;
        let mut dropped = 0;
        for (a, m) in self.adj.iter_mut().enumerate() {
            m.retain(|&b, w| {
                *w *= keep;
                let alive = *w >= prune_epsilon;
                if !alive && (a as AgentId) < b {
                    dropped += 1;
                }
                alive
            });
        }
        self.edges -= dropped;
    }

    /// Agents whose edge to `a` has weight at least `threshold`, ascending.
    pub fn friends_of(&self, a: AgentId, threshold: f64) -> Vec<AgentId> {
        self.neighbors(a).filter(|&(_, w)| w >= threshold).map(|(b, _)| b).collect()
    }

    pub fn has_friend_among(&self, a: AgentId, others: &[AgentId], threshold: f64) -> bool {
        let m = &self.adj[a as usize];
        if m.len() < others.len() {
            m.iter().any(|(b, &w)| w >= threshold && others.binary_search(b).is_ok())
        } else {
            others.iter().any(|b| *b != a && m.get(b).is_some_and(|&w| w >= threshold))
        }
    }

    /// `(degree, agents with that degree)` over friend edges, ascending degree.
    pub fn degree_histogram(&self, threshold: f64) -> Vec<(usize, usize)> {
        let mut hist = BTreeMap::new();
        for m in &self.adj {
            let d = m.values().filter(|&&w| w >= threshold).count();
            *hist.entry(d).or_insert(0) += 1;
        }
        hist.into_iter().collect()
    }
}

/// Recreation unit hosting the most friends of `a` (ties: smallest unit id).
/// `recreation_site[i]` is the recreation unit agent `i` is at, if any.
pub fn meeting_hint(g: &SocialGraph, a: AgentId, threshold: f64, recreation_site: &[Option<UnitId>]) -> Option<UnitId> {
    let mut counts: BTreeMap<UnitId, usize> = BTreeMap::new();
    for (b, w) in g.neighbors(a) {
        if w >= threshold {
            if let Some(Some(u)) = recreation_site.get(b as usize) {
                *counts.entry(*u).or_insert(0) += 1;
            }
        }
    }
    // max_by_key keeps the last maximum; iterate descending ids so the smallest wins.
    counts.into_iter().rev().max_by_key(|&(_, c)| c).map(|(u, _)| u)
}

/// Histogram from an edge list, for recounting logged snapshots.
pub fn degree_histogram_from_edges(n_agents: usize, edges: impl IntoIterator<Item = (AgentId, AgentId, f64)>, threshold: f64) -> Vec<(usize, usize)> {
    let mut degree = vec![0usize; n_agents];
    for (a, b, w) in edges {
        if w >= threshold {
            degree[a as usize] += 1;
            degree[b as usize] += 1;
        }
    }
    let mut hist = BTreeMap::new();
    for d in degree {
        *hist.entry(d).or_insert(0) += 1;
    }
    hist.into_iter().collect()
}
