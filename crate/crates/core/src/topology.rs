//! The distributed system as a rooted, edge-weighted, neighbor-ordered graph.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metric::{MetricSpace, Weight};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProcessId(pub usize);

impl ProcessId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for ProcessId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TopologyError {
    #[error("unknown process id {0}")]
    UnknownProcess(ProcessId),
    #[error("no edge between {0} and {1}")]
    NoEdge(ProcessId, ProcessId),
    #[error("invalid topology: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
    #[error("topology too large for exhaustive search ({n} > {limit} processes)")]
    TooLarge { n: usize, limit: usize },
}

/// A broken topology invariant. Violations are data, not errors.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    Empty,
    RootOutOfRange(ProcessId),
    EndpointOutOfRange { u: ProcessId, v: ProcessId },
    SelfLoop(ProcessId),
    ParallelEdge { u: ProcessId, v: ProcessId },
    Disconnected { unreachable: Vec<ProcessId> },
    OrderIncomplete { process: ProcessId, missing: Vec<ProcessId> },
    OrderForeign { process: ProcessId, extra: Vec<ProcessId> },
    OrderDuplicate { process: ProcessId, repeated: ProcessId },
    WeightOutsideDomain { u: ProcessId, v: ProcessId, weight: String },
    PathBoundOutOfRange { bound: usize, n: usize },
    PathBoundTooSmall { bound: usize, longest: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Empty => write!(f, "topology has no processes"),
            Violation::RootOutOfRange(r) => write!(f, "root {r} is not a process"),
            Violation::EndpointOutOfRange { u, v } => write!(f, "edge {{{u},{v}}} has an unknown endpoint"),
            Violation::SelfLoop(v) => write!(f, "self-loop at {v}"),
            Violation::ParallelEdge { u, v } => write!(f, "parallel edge {{{u},{v}}}"),
            Violation::Disconnected { unreachable } => {
                write!(f, "disconnected: {:?} unreachable from the root", ids(unreachable))
            }
            Violation::OrderIncomplete { process, missing } => {
                write!(f, "order incomplete at {process}: missing {:?}", ids(missing))
            }
            Violation::OrderForeign { process, extra } => {
                write!(f, "order at {process} lists non-neighbors {:?}", ids(extra))
            }
            Violation::OrderDuplicate { process, repeated } => {
                write!(f, "order at {process} repeats {repeated}")
            }
            Violation::WeightOutsideDomain { u, v, weight } => {
                write!(f, "weight {weight} of edge {{{u},{v}}} is outside W")
            }
            Violation::PathBoundOutOfRange { bound, n } => {
                write!(f, "path bound D={bound} outside [2, max(n, 2)] with n={n}")
            }
            Violation::PathBoundTooSmall { bound, longest } => {
                write!(f, "path bound D={bound} below the longest simple path ({longest} processes)")
            }
        }
    }
}

fn ids(v: &[ProcessId]) -> Vec<usize> {
    v.iter().map(|p| p.0).collect()
}

/// Normalized key for an undirected edge.
fn edge_key(u: ProcessId, v: ProcessId) -> (ProcessId, ProcessId) {
    if u <= v {
        (u, v)
    } else {
        (v, u)
    }
}

/// Largest graph on which simple paths are enumerated.
pub const EXHAUSTIVE_LIMIT: usize = 12;

/// The system `S = (P, L)`: processes `0..n`, a root, weighted undirected
/// edges, a total neighbor order per process, and the path bound `D`.
///
/// Construction does not validate; call [`Topology::validate`] (or use
/// [`Topology::checked`]) before simulating.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Topology {
    n: usize,
    root: ProcessId,
    edges: Vec<(ProcessId, ProcessId, Weight)>,
    weights: BTreeMap<(ProcessId, ProcessId), Weight>,
    neighbor_order: Vec<Vec<ProcessId>>,
    max_path_len: usize,
    labels: Option<Vec<String>>,
}

impl Topology {
    /// Builds a topology with ascending-id neighbor orders and `D = max(n, 2)`.
    pub fn new(n: usize, root: ProcessId, edges: Vec<(ProcessId, ProcessId, Weight)>) -> Self {
        let mut weights = BTreeMap::new();
        let mut adjacency: Vec<BTreeSet<ProcessId>> = vec![BTreeSet::new(); n];
        for (u, v, w) in &edges {
            weights.entry(edge_key(*u, *v)).or_insert_with(|| w.clone());
            if u.0 < n && v.0 < n && u != v {
                adjacency[u.0].insert(*v);
                adjacency[v.0].insert(*u);
            }
        }
        let neighbor_order = adjacency.into_iter().map(|s| s.into_iter().collect()).collect();
        Topology { n, root, edges, weights, neighbor_order, max_path_len: n.max(2), labels: None }
    }

    /// Convenience constructor from `(u, v, weight)` index triples.
    pub fn from_edges(n: usize, root: usize, edges: impl IntoIterator<Item = (usize, usize, Weight)>) -> Self {
        let edges = edges.into_iter().map(|(u, v, w)| (ProcessId(u), ProcessId(v), w)).collect();
        Topology::new(n, ProcessId(root), edges)
    }

    pub fn with_neighbor_order(mut self, v: ProcessId, order: Vec<ProcessId>) -> Self {
        if v.0 < self.n {
            self.neighbor_order[v.0] = order;
        }
        self
    }

    pub fn with_max_path_len(mut self, d: usize) -> Self {
        self.max_path_len = d;
        self
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Self {
        self.labels = Some(labels);
        self
    }

    /// Validates structure and, when given, weight membership in `W`.
    pub fn checked(self, metric: Option<&dyn MetricSpace>) -> Result<Self, TopologyError> {
        let mut violations = self.validate();
        if let Some(ms) = metric {
            violations.extend(self.validate_weights(ms));
        }
        if violations.is_empty() {
            Ok(self)
        } else {
            Err(TopologyError::Invalid(violations))
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn root(&self) -> ProcessId {
        self.root
    }

    /// `D`, the bound on the number of processes in a simple path.
    pub fn max_path_len(&self) -> usize {
        self.max_path_len
    }

    pub fn processes(&self) -> impl Iterator<Item = ProcessId> + '_ {
        (0..self.n).map(ProcessId)
    }

    pub fn contains(&self, v: ProcessId) -> bool {
        v.0 < self.n
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// Display name: the label when present, else the index.
    pub fn name(&self, v: ProcessId) -> String {
        self.labels
            .as_ref()
            .and_then(|l| l.get(v.0).cloned())
            .unwrap_or_else(|| v.0.to_string())
    }

    /// Edges as given at construction, in input order.
    pub fn edges(&self) -> &[(ProcessId, ProcessId, Weight)] {
        &self.edges
    }

    /// `N_v` in the stored neighbor order.
    pub fn neighbors(&self, v: ProcessId) -> Result<&[ProcessId], TopologyError> {
        self.neighbor_order
            .get(v.0)
            .map(Vec::as_slice)
            .ok_or(TopologyError::UnknownProcess(v))
    }

    /// Unchecked `N_v`; `v` must be in range.
    pub(crate) fn nbrs(&self, v: ProcessId) -> &[ProcessId] {
        &self.neighbor_order[v.0]
    }

    pub fn is_neighbor(&self, v: ProcessId, u: ProcessId) -> bool {
        self.weights.contains_key(&edge_key(u, v)) && u != v
    }

    /// `w_{u,v}`.
    pub fn weight(&self, u: ProcessId, v: ProcessId) -> Result<&Weight, TopologyError> {
        self.weights.get(&edge_key(u, v)).ok_or(TopologyError::NoEdge(u, v))
    }

    /// Hop distance (unit edge cost).
    pub fn distance(&self, u: ProcessId, v: ProcessId) -> Result<usize, TopologyError> {
        for p in [u, v] {
            if !self.contains(p) {
                return Err(TopologyError::UnknownProcess(p));
            }
        }
        Ok(self.bfs(u)[v.0].unwrap_or(usize::MAX))
    }

    /// Hop distances from `source` to every process; `None` when unreachable.
    pub fn bfs(&self, source: ProcessId) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.n];
        let mut queue = VecDeque::new();
        dist[source.0] = Some(0);
        queue.push_back(source);
        while let Some(u) = queue.pop_front() {
            let du = dist[u.0].unwrap_or(0);
            for &w in &self.neighbor_order[u.0] {
                if w.0 < self.n && dist[w.0].is_none() {
                    dist[w.0] = Some(du + 1);
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    fn true_adjacency(&self) -> Vec<BTreeSet<ProcessId>> {
        let mut adjacency = vec![BTreeSet::new(); self.n];
        for (u, v, _) in &self.edges {
            if u.0 < self.n && v.0 < self.n && u != v {
                adjacency[u.0].insert(*v);
                adjacency[v.0].insert(*u);
            }
        }
        adjacency
    }

    /// Number of processes on a longest simple path; `None` above
    /// [`EXHAUSTIVE_LIMIT`].
    pub fn longest_simple_path(&self) -> Option<usize> {
        if self.n > EXHAUSTIVE_LIMIT {
            return None;
        }
        let adjacency = self.true_adjacency();
        fn dfs(adj: &[BTreeSet<ProcessId>], v: ProcessId, seen: &mut Vec<bool>, depth: usize, best: &mut usize) {
            *best = (*best).max(depth);
            for &w in &adj[v.0] {
                if !seen[w.0] {
                    seen[w.0] = true;
                    dfs(adj, w, seen, depth + 1, best);
                    seen[w.0] = false;
                }
            }
        }
        let mut best = usize::from(self.n > 0);
        for start in 0..self.n {
            let mut seen = vec![false; self.n];
            seen[start] = true;
            dfs(&adjacency, ProcessId(start), &mut seen, 1, &mut best);
        }
        Some(best)
    }

    /// Every structural invariant violation; empty iff the topology is valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.n == 0 {
            out.push(Violation::Empty);
            return out;
        }
        if !self.contains(self.root) {
            out.push(Violation::RootOutOfRange(self.root));
        }
        let mut seen = BTreeSet::new();
        for (u, v, _) in &self.edges {
            if !self.contains(*u) || !self.contains(*v) {
                out.push(Violation::EndpointOutOfRange { u: *u, v: *v });
                continue;
            }
            if u == v {
                out.push(Violation::SelfLoop(*u));
                continue;
            }
            if !seen.insert(edge_key(*u, *v)) {
                out.push(Violation::ParallelEdge { u: *u, v: *v });
            }
        }
        let adjacency = self.true_adjacency();
        if self.contains(self.root) {
            let mut reached = vec![false; self.n];
            let mut queue = VecDeque::from([self.root]);
            reached[self.root.0] = true;
            while let Some(u) = queue.pop_front() {
                for &w in &adjacency[u.0] {
                    if !reached[w.0] {
                        reached[w.0] = true;
                        queue.push_back(w);
                    }
                }
            }
            let unreachable: Vec<_> = self.processes().filter(|p| !reached[p.0]).collect();
            if !unreachable.is_empty() {
                out.push(Violation::Disconnected { unreachable });
            }
        }
        for v in self.processes() {
            let order = &self.neighbor_order[v.0];
            let mut listed = BTreeSet::new();
            for &u in order {
                if !listed.insert(u) {
                    out.push(Violation::OrderDuplicate { process: v, repeated: u });
                }
            }
            let missing: Vec<_> = adjacency[v.0].difference(&listed).copied().collect();
            if !missing.is_empty() {
                out.push(Violation::OrderIncomplete { process: v, missing });
            }
            let extra: Vec<_> = listed.difference(&adjacency[v.0]).copied().collect();
            if !extra.is_empty() {
                out.push(Violation::OrderForeign { process: v, extra });
            }
        }
        let upper = self.n.max(2);
        if self.max_path_len < 2 || self.max_path_len > upper {
            out.push(Violation::PathBoundOutOfRange { bound: self.max_path_len, n: self.n });
        } else if let Some(longest) = self.longest_simple_path() {
            if self.max_path_len < longest {
                out.push(Violation::PathBoundTooSmall { bound: self.max_path_len, longest });
            }
        }
        out
    }

    /// Edges whose weight is not a member of the metric's `W`.
    pub fn validate_weights(&self, ms: &dyn MetricSpace) -> Vec<Violation> {
        self.edges
            .iter()
            .filter(|(_, _, w)| !ms.contains_weight(w))
            .map(|(u, v, w)| Violation::WeightOutsideDomain { u: *u, v: *v, weight: w.to_string() })
            .collect()
    }

    /// Distinct weights in use, in edge order.
    pub fn weight_set(&self) -> Vec<Weight> {
        let mut seen = BTreeSet::new();
        self.edges
            .iter()
            .filter(|(_, _, w)| seen.insert(w.clone()))
            .map(|(_, _, w)| w.clone())
            .collect()
    }
}

/// Draws a connected graph: a random spanning tree plus extra edges, each
/// non-tree pair included with probability `extra_edge_prob`. Neighbor
/// orders are shuffled; weights come from `weight`.
pub fn random_connected<R: Rng + ?Sized>(
    n: usize,
    extra_edge_prob: f64,
    rng: &mut R,
    mut weight: impl FnMut(&mut R) -> Weight,
) -> Topology {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    let mut pairs = BTreeSet::new();
    for i in 1..n {
        let parent = perm[rng.gen_range(0..i)];
        pairs.insert(edge_pair(perm[i], parent));
    }
    for u in 0..n {
        for v in (u + 1)..n {
            if !pairs.contains(&(u, v)) && rng.gen_bool(extra_edge_prob) {
                pairs.insert((u, v));
            }
        }
    }
    let edges: Vec<_> = pairs.into_iter().map(|(u, v)| (u, v, weight(rng))).collect();
    let root = rng.gen_range(0..n.max(1));
    let mut t = Topology::from_edges(n, root, edges);
    for v in 0..n {
        let mut order = t.neighbor_order[v].clone();
        order.shuffle(rng);
        t.neighbor_order[v] = order;
    }
    t
}

fn edge_pair(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit(n: u64) -> Weight {
        Weight::Nat(n)
    }

    fn path(n: usize) -> Topology {
        Topology::from_edges(n, 0, (1..n).map(|i| (i - 1, i, unit(1))))
    }

    #[test]
    fn neighbors_follow_stored_order() {
        let t = path(3).with_neighbor_order(ProcessId(1), vec![ProcessId(0), ProcessId(2)]);
        assert_eq!(t.neighbors(ProcessId(1)).unwrap(), &[ProcessId(0), ProcessId(2)]);
        let star = Topology::from_edges(4, 0, [(0, 3, unit(1)), (0, 1, unit(1)), (0, 2, unit(1))]);
        assert_eq!(star.neighbors(ProcessId(0)).unwrap(), &[ProcessId(1), ProcessId(2), ProcessId(3)]);
        assert_eq!(star.neighbors(ProcessId(4)), Err(TopologyError::UnknownProcess(ProcessId(4))));
    }

    #[test]
    fn distance_examples() {
        let t = path(4);
        assert_eq!(t.distance(ProcessId(2), ProcessId(2)).unwrap(), 0);
        assert_eq!(t.distance(ProcessId(0), ProcessId(3)).unwrap(), 3);
        let cycle = Topology::from_edges(4, 0, [(0, 1, unit(1)), (1, 2, unit(1)), (2, 3, unit(1)), (3, 0, unit(1))]);
        assert_eq!(cycle.distance(ProcessId(0), ProcessId(2)).unwrap(), 2);
        assert!(cycle.distance(ProcessId(0), ProcessId(9)).is_err());
    }

    #[test]
    fn validate_examples() {
        let triangle = Topology::from_edges(3, 0, [(0, 1, unit(1)), (1, 2, unit(1)), (0, 2, unit(1))]);
        assert!(triangle.validate().is_empty());

        let split = Topology::from_edges(2, 0, []);
        assert_eq!(split.validate(), vec![Violation::Disconnected { unreachable: vec![ProcessId(1)] }]);

        let partial = triangle.clone().with_neighbor_order(ProcessId(0), vec![ProcessId(1)]);
        assert_eq!(
            partial.validate(),
            vec![Violation::OrderIncomplete { process: ProcessId(0), missing: vec![ProcessId(2)] }]
        );
    }

    #[test]
    fn validate_catches_structural_faults() {
        let t = Topology::from_edges(3, 0, [(0, 1, unit(1)), (1, 0, unit(2)), (1, 1, unit(1)), (1, 2, unit(1))]);
        let v = t.validate();
        assert!(v.contains(&Violation::ParallelEdge { u: ProcessId(1), v: ProcessId(0) }));
        assert!(v.contains(&Violation::SelfLoop(ProcessId(1))));
        let short = path(4).with_max_path_len(3);
        assert_eq!(short.validate(), vec![Violation::PathBoundTooSmall { bound: 3, longest: 4 }]);
        assert!(!path(4).with_max_path_len(1).validate().is_empty());
    }

    #[test]
    fn weights_are_symmetric() {
        let t = path(3);
        assert_eq!(t.weight(ProcessId(1), ProcessId(0)), t.weight(ProcessId(0), ProcessId(1)));
        assert!(t.weight(ProcessId(0), ProcessId(2)).is_err());
    }

    proptest! {
        #[test]
        fn generated_graphs_are_valid_and_metric(seed in any::<u64>(), n in 1usize..=10) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let t = random_connected(n, 0.3, &mut rng, |r| Weight::Nat(r.gen_range(0..5)));
            prop_assert!(t.validate().is_empty());
            for v in t.processes() {
                let nb = t.neighbors(v).unwrap();
                let distinct: BTreeSet<_> = nb.iter().collect();
                prop_assert_eq!(distinct.len(), nb.len());
            }
            // Floyd-Warshall oracle over unit weights.
            let mut fw = vec![vec![usize::MAX / 4; n]; n];
            for (i, row) in fw.iter_mut().enumerate() {
                row[i] = 0;
            }
            for (u, v, _) in t.edges() {
                fw[u.0][v.0] = 1;
                fw[v.0][u.0] = 1;
            }
            for k in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        fw[i][j] = fw[i][j].min(fw[i][k] + fw[k][j]);
                    }
                }
            }
            let table: Vec<Vec<usize>> = t.processes().map(|u| t.bfs(u).into_iter().map(|d| d.unwrap()).collect()).collect();
            prop_assert_eq!(&table, &fw);
            for a in 0..n {
                for b in 0..n {
                    prop_assert_eq!(table[a][b], table[b][a]);
                    for c in 0..n {
                        prop_assert!(table[a][c] <= table[a][b] + table[b][c]);
                    }
                }
            }
        }
    }
}
