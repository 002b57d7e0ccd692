//! Ground truth: maximum metric values, the containment area `S_B`, the
//! per-process legitimacy predicate and the `IM` / `LC` ladder.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::metric::{MetricError, MetricSpace, MetricValue};
use crate::protocol::Configuration;
use crate::topology::{ProcessId, Topology, EXHAUSTIVE_LIMIT};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AnalysisError {
    #[error("the root {0} cannot be Byzantine")]
    ByzantineRoot(ProcessId),
    #[error("unknown process {0}")]
    UnknownProcess(ProcessId),
    #[error("process {0} is unreachable from the candidate root")]
    Unreachable(ProcessId),
    #[error("exhaustive enumeration needs n <= {limit}, got {n}")]
    TooLarge { n: usize, limit: usize },
    #[error(transparent)]
    Metric(#[from] MetricError),
}

/// `μ(v, x)` for every `v`: the best value `v` can obtain when `x` plays the
/// root. Label-setting search that always settles the `≺`-largest tentative
/// label next (lowest id on ties).
pub fn compute_mu(t: &Topology, ms: &dyn MetricSpace, root: ProcessId) -> Result<Vec<MetricValue>, AnalysisError> {
    if !t.contains(root) {
        return Err(AnalysisError::UnknownProcess(root));
    }
    let n = t.len();
    let mut label: Vec<Option<MetricValue>> = vec![None; n];
    let mut settled = vec![false; n];
    label[root.0] = Some(ms.root_value());
    loop {
        let mut next: Option<usize> = None;
        for v in 0..n {
            if settled[v] {
                continue;
            }
            let Some(candidate) = &label[v] else { continue };
            match next {
                Some(best) if !ms.precedes(label[best].as_ref().unwrap(), candidate) => {}
                _ => next = Some(v),
            }
        }
        let Some(u) = next else { break };
        settled[u] = true;
        let lu = label[u].clone().unwrap();
        for &v in t.nbrs(ProcessId(u)) {
            if settled[v.0] {
                continue;
            }
            let offer = ms.met(&lu, t.weight(ProcessId(u), v).expect("edge"))?;
            if label[v.0].as_ref().is_none_or(|cur| ms.precedes(cur, &offer)) {
                label[v.0] = Some(offer);
            }
        }
    }
    label
        .into_iter()
        .enumerate()
        .map(|(v, l)| l.ok_or(AnalysisError::Unreachable(ProcessId(v))))
        .collect()
}

/// Same mapping as [`compute_mu`], by enumerating every simple path that
/// starts at `root`.
pub fn compute_mu_bruteforce(
    t: &Topology,
    ms: &dyn MetricSpace,
    root: ProcessId,
) -> Result<Vec<MetricValue>, AnalysisError> {
    if t.len() > EXHAUSTIVE_LIMIT {
        return Err(AnalysisError::TooLarge { n: t.len(), limit: EXHAUSTIVE_LIMIT });
    }
    if !t.contains(root) {
        return Err(AnalysisError::UnknownProcess(root));
    }
    let mut best: Vec<Option<MetricValue>> = vec![None; t.len()];
    let mut on_path = vec![false; t.len()];
    on_path[root.0] = true;
    extend(t, ms, root, ms.root_value(), &mut on_path, &mut best)?;
    best.into_iter()
        .enumerate()
        .map(|(v, l)| l.ok_or(AnalysisError::Unreachable(ProcessId(v))))
        .collect()
}

fn extend(
    t: &Topology,
    ms: &dyn MetricSpace,
    at: ProcessId,
    value: MetricValue,
    on_path: &mut [bool],
    best: &mut [Option<MetricValue>],
) -> Result<(), AnalysisError> {
    if best[at.0].as_ref().is_none_or(|b| ms.precedes(b, &value)) {
        best[at.0] = Some(value.clone());
    }
    for &next in t.nbrs(at) {
        if on_path[next.0] {
            continue;
        }
        let composed = ms.met(&value, t.weight(at, next).expect("edge"))?;
        on_path[next.0] = true;
        extend(t, ms, next, composed, on_path, best)?;
        on_path[next.0] = false;
    }
    Ok(())
}

/// `μ(·, x)` columns for a set of candidate roots.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MuTable {
    roots: Vec<ProcessId>,
    columns: Vec<Vec<MetricValue>>,
}

impl MuTable {
    pub fn build(t: &Topology, ms: &dyn MetricSpace, roots: &[ProcessId]) -> Result<Self, AnalysisError> {
        let columns = roots.iter().map(|&x| compute_mu(t, ms, x)).collect::<Result<_, _>>()?;
        Ok(MuTable { roots: roots.to_vec(), columns })
    }

    pub fn roots(&self) -> &[ProcessId] {
        &self.roots
    }

    pub fn column(&self, root: ProcessId) -> Option<&[MetricValue]> {
        let i = self.roots.iter().position(|&x| x == root)?;
        Some(&self.columns[i])
    }

    pub fn get(&self, v: ProcessId, root: ProcessId) -> Option<&MetricValue> {
        self.column(root)?.get(v.0)
    }
}

/// `S_B` together with the Byzantine set it was computed for.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ContainmentArea {
    pub byzantine: BTreeSet<ProcessId>,
    pub members: BTreeSet<ProcessId>,
}

impl ContainmentArea {
    pub fn contains(&self, v: ProcessId) -> bool {
        self.members.contains(&v)
    }

    /// Correct processes outside `S_B`.
    pub fn outside(&self, t: &Topology) -> Vec<ProcessId> {
        t.processes().filter(|v| !self.byzantine.contains(v) && !self.members.contains(v)).collect()
    }
}

fn check_byzantine(t: &Topology, byz: &BTreeSet<ProcessId>) -> Result<(), AnalysisError> {
    if let Some(&bad) = byz.iter().find(|b| !t.contains(**b)) {
        return Err(AnalysisError::UnknownProcess(bad));
    }
    if byz.contains(&t.root()) {
        return Err(AnalysisError::ByzantineRoot(t.root()));
    }
    Ok(())
}

fn area_from(t: &Topology, ms: &dyn MetricSpace, byz: &BTreeSet<ProcessId>, mu: &MuTable) -> ContainmentArea {
    let from_root = mu.column(t.root()).expect("root column");
    let members = t
        .processes()
        .filter(|v| *v != t.root() && !byz.contains(v))
        .filter(|&v| {
            let mut offers = byz.iter().map(|&b| mu.get(v, b).expect("byzantine column"));
            let Some(first) = offers.next() else { return false };
            let strongest = offers.fold(first, |acc, m| if ms.precedes(acc, m) { m } else { acc });
            ms.precedes_or_eq(&from_root[v.0], strongest)
        })
        .collect();
    ContainmentArea { byzantine: byz.clone(), members }
}

/// `S_B = {v ∈ V∖B : μ(v,r) ⪯ max_≺ μ(v,b)} ∖ {r}`; empty when `B` is.
pub fn containment_area(
    t: &Topology,
    ms: &dyn MetricSpace,
    byz: &BTreeSet<ProcessId>,
) -> Result<ContainmentArea, AnalysisError> {
    check_byzantine(t, byz)?;
    let roots: Vec<_> = std::iter::once(t.root()).chain(byz.iter().copied()).collect();
    let mu = MuTable::build(t, ms, &roots)?;
    Ok(area_from(t, ms, byz, &mu))
}

/// A spanning tree whose every rooted path is a maximum metric path, as a
/// parent mapping (`None` at the root).
pub fn max_metric_tree_oracle(t: &Topology, ms: &dyn MetricSpace) -> Result<Vec<Option<ProcessId>>, AnalysisError> {
    let mu = compute_mu_bruteforce(t, ms, t.root())?;
    let mut parent = vec![None; t.len()];
    let mut attached = vec![false; t.len()];
    attached[t.root().0] = true;
    // Attach in rounds so parents are always already in the tree; this rules
    // out cycles among processes whose values are fixed points.
    loop {
        let mut progressed = false;
        for v in t.processes() {
            if attached[v.0] {
                continue;
            }
            let pick = t.nbrs(v).iter().copied().find(|&p| {
                attached[p.0] && ms.compose(&mu[p.0], t.weight(p, v).expect("edge")) == mu[v.0]
            });
            if let Some(p) = pick {
                parent[v.0] = Some(p);
                attached[v.0] = true;
                progressed = true;
            }
        }
        if !progressed {
            break;
        }
    }
    match attached.iter().position(|a| !a) {
        Some(v) => Err(AnalysisError::Unreachable(ProcessId(v))),
        None => Ok(parent),
    }
}

/// Correct processes at hop distance more than `c` from every Byzantine one.
pub fn c_correct_set(t: &Topology, byz: &BTreeSet<ProcessId>, c: usize) -> BTreeSet<ProcessId> {
    let tables: Vec<_> = byz.iter().map(|&b| t.bfs(b)).collect();
    t.processes()
        .filter(|v| !byz.contains(v))
        .filter(|v| tables.iter().all(|d| d[v.0].is_none_or(|hops| hops > c)))
        .collect()
}

/// Why a process fails its legitimacy predicate.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SpecViolation {
    RootParent,
    RootLevel,
    RootDist,
    CyclicParentChain,
    ParentNotNeighbor { at: ProcessId },
    /// The chain ends at a correct non-root process.
    UnanchoredChain { at: ProcessId },
    /// The chain's anchor is not in the `(⊥, mr, 0)` shape.
    AnchorState { at: ProcessId },
    LevelMismatch { at: ProcessId },
    DistMismatch { at: ProcessId },
    /// The parent's offer is not the best eligible offer.
    NotBestOffer { at: ProcessId },
    /// `level_v ≠ μ(v, v_0)`.
    NotMaximal { anchor: ProcessId },
}

impl fmt::Display for SpecViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpecViolation::RootParent => write!(f, "root parent"),
            SpecViolation::RootLevel => write!(f, "root level"),
            SpecViolation::RootDist => write!(f, "root dist"),
            SpecViolation::CyclicParentChain => write!(f, "cyclic parent chain"),
            SpecViolation::ParentNotNeighbor { at } => write!(f, "parent of {at} is not a neighbor"),
            SpecViolation::UnanchoredChain { at } => write!(f, "chain ends at correct process {at}"),
            SpecViolation::AnchorState { at } => write!(f, "anchor {at} is not (⊥, mr, 0)"),
            SpecViolation::LevelMismatch { at } => write!(f, "level mismatch at {at}"),
            SpecViolation::DistMismatch { at } => write!(f, "dist mismatch at {at}"),
            SpecViolation::NotBestOffer { at } => write!(f, "parent of {at} is not a best offer"),
            SpecViolation::NotMaximal { anchor } => write!(f, "level is not maximal for anchor {anchor}"),
        }
    }
}

/// Realized metric values `m_0 = mr ≻ m_1 ≻ … ≻ m_k` and the sets of the
/// convergence ladder.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LadderIndex {
    pub values: Vec<MetricValue>,
    /// `P_{m_i}`: correct processes outside `S_B` with `μ(v, r) = m_i`.
    pub p_sets: Vec<BTreeSet<ProcessId>>,
    /// `V_{m_i}`: union of `P_{m_j}` for `j ≤ i`.
    pub v_sets: Vec<BTreeSet<ProcessId>>,
    /// `I_{m_i}`: processes whose best value over `B ∪ {r}` is below `m_i`.
    pub i_sets: Vec<BTreeSet<ProcessId>>,
}

impl LadderIndex {
    /// Index `k` of the last rung.
    pub fn top(&self) -> usize {
        self.values.len() - 1
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Everything derived from `(topology, metric, B)` that predicates need,
/// computed once.
#[derive(Clone, Debug)]
pub struct Analysis<'a> {
    topology: &'a Topology,
    metric: &'a dyn MetricSpace,
    mu: MuTable,
    best: Vec<MetricValue>,
    area: ContainmentArea,
    ladder: LadderIndex,
}

impl<'a> Analysis<'a> {
    pub fn new(t: &'a Topology, ms: &'a dyn MetricSpace, byz: &BTreeSet<ProcessId>) -> Result<Self, AnalysisError> {
        check_byzantine(t, byz)?;
        let roots: Vec<_> = std::iter::once(t.root()).chain(byz.iter().copied()).collect();
        let mu = MuTable::build(t, ms, &roots)?;
        let area = area_from(t, ms, byz, &mu);
        let best: Vec<_> = t
            .processes()
            .map(|v| {
                let mut it = roots.iter().map(|&x| mu.get(v, x).unwrap());
                let first = it.next().unwrap();
                it.fold(first, |acc, m| if ms.precedes(acc, m) { m } else { acc }).clone()
            })
            .collect();

        let mut values: Vec<MetricValue> = vec![ms.root_value()];
        for col in &mu.columns {
            for m in col {
                if !values.contains(m) {
                    values.push(m.clone());
                }
            }
        }
        // Strictly ≺-descending: mr first.
        values.sort_by(|a, b| {
            if ms.precedes(b, a) {
                std::cmp::Ordering::Less
            } else if ms.precedes(a, b) {
                std::cmp::Ordering::Greater
            } else {
                std::cmp::Ordering::Equal
            }
        });
        let from_root = mu.column(t.root()).unwrap();
        let p_sets: Vec<BTreeSet<_>> = values
            .iter()
            .map(|m| {
                t.processes()
                    .filter(|v| !byz.contains(v) && !area.contains(*v) && from_root[v.0] == *m)
                    .collect()
            })
            .collect();
        let mut v_sets = Vec::with_capacity(values.len());
        let mut acc = BTreeSet::new();
        for p in &p_sets {
            acc.extend(p.iter().copied());
            v_sets.push(acc.clone());
        }
        let i_sets = values
            .iter()
            .map(|m| t.processes().filter(|v| ms.precedes(&best[v.0], m)).collect())
            .collect();
        let ladder = LadderIndex { values, p_sets, v_sets, i_sets };
        Ok(Analysis { topology: t, metric: ms, mu, best, area, ladder })
    }

    pub fn topology(&self) -> &'a Topology {
        self.topology
    }

    pub fn metric(&self) -> &'a dyn MetricSpace {
        self.metric
    }

    pub fn mu(&self) -> &MuTable {
        &self.mu
    }

    pub fn area(&self) -> &ContainmentArea {
        &self.area
    }

    pub fn ladder(&self) -> &LadderIndex {
        &self.ladder
    }

    pub fn byzantine(&self) -> &BTreeSet<ProcessId> {
        &self.area.byzantine
    }

    pub fn is_byzantine(&self, v: ProcessId) -> bool {
        self.area.byzantine.contains(&v)
    }

    /// `max_≺` of `μ(v, p)` over `p ∈ B ∪ {r}`.
    pub fn best(&self, v: ProcessId) -> &MetricValue {
        &self.best[v.0]
    }

    /// Correct processes outside `S_B`, the root included.
    pub fn sb_correct(&self) -> Vec<ProcessId> {
        self.area.outside(self.topology)
    }

    /// The legitimacy predicate of one process.
    pub fn check_spec(&self, cfg: &Configuration, v: ProcessId) -> Result<(), SpecViolation> {
        let t = self.topology;
        let ms = self.metric;
        let mr = ms.root_value();
        let d = t.max_path_len();
        if v == t.root() {
            let s = &cfg[v];
            return if s.prnt.is_some() {
                Err(SpecViolation::RootParent)
            } else if s.level != mr {
                Err(SpecViolation::RootLevel)
            } else if s.dist != 0 {
                Err(SpecViolation::RootDist)
            } else {
                Ok(())
            };
        }
        // Walk up to the anchor: chain = [v_k = v, …, v_0].
        let mut chain = vec![v];
        let mut seen = vec![false; t.len()];
        seen[v.0] = true;
        let mut at = v;
        while let Some(p) = cfg[at].prnt {
            if !t.is_neighbor(at, p) {
                return Err(SpecViolation::ParentNotNeighbor { at });
            }
            if seen[p.0] {
                return Err(SpecViolation::CyclicParentChain);
            }
            seen[p.0] = true;
            chain.push(p);
            at = p;
        }
        chain.reverse();
        let anchor = chain[0];
        if chain.len() < 2 || !(anchor == t.root() || self.is_byzantine(anchor)) {
            return Err(SpecViolation::UnanchoredChain { at: anchor });
        }
        if cfg[anchor].level != mr || cfg[anchor].dist != 0 {
            return Err(SpecViolation::AnchorState { at: anchor });
        }
        for (i, pair) in chain.windows(2).enumerate() {
            let (prev, cur) = (pair[0], pair[1]);
            let offer = ms.compose(&cfg[prev].level, t.weight(prev, cur).expect("edge"));
            if cfg[cur].level != offer {
                return Err(SpecViolation::LevelMismatch { at: cur });
            }
            if cfg[cur].dist != i + 1 {
                return Err(SpecViolation::DistMismatch { at: cur });
            }
        }
        for pair in chain.windows(2) {
            let (prev, cur) = (pair[0], pair[1]);
            let offer = ms.compose(&cfg[prev].level, t.weight(prev, cur).expect("edge"));
            let beaten = t.nbrs(cur).iter().any(|&u| {
                cfg[u].dist + 1 < d && ms.precedes(&offer, &ms.compose(&cfg[u].level, t.weight(u, cur).expect("edge")))
            });
            let prev_eligible = cfg[prev].dist + 1 < d;
            if beaten || !prev_eligible {
                return Err(SpecViolation::NotBestOffer { at: cur });
            }
        }
        let target = self.mu.get(v, anchor).expect("anchor column");
        if cfg[v].level != *target {
            return Err(SpecViolation::NotMaximal { anchor });
        }
        Ok(())
    }

    /// `spec(v)` for every process (Byzantine entries are `false`).
    pub fn spec_vector(&self, cfg: &Configuration) -> Vec<bool> {
        self.topology
            .processes()
            .map(|v| !self.is_byzantine(v) && self.check_spec(cfg, v).is_ok())
            .collect()
    }

    /// `IM_m`: every level is at most `max_≺(m, best(v))`.
    pub fn check_im(&self, cfg: &Configuration, m: &MetricValue) -> bool {
        let ms = self.metric;
        cfg.iter().all(|(v, s)| {
            let best = &self.best[v.0];
            let bound = if ms.precedes(m, best) { best } else { m };
            ms.precedes_or_eq(&s.level, bound)
        })
    }

    /// `LC_{m_i}`: spec on `V_{m_i}` and `IM_{m_i}`.
    pub fn check_lc(&self, cfg: &Configuration, i: usize) -> bool {
        self.ladder.v_sets[i].iter().all(|&v| self.check_spec(cfg, v).is_ok())
            && self.check_im(cfg, &self.ladder.values[i])
    }

    /// Membership in `𝓛𝓒`.
    pub fn is_legitimate(&self, cfg: &Configuration) -> bool {
        self.check_lc(cfg, self.ladder.top())
    }

    /// Dist saturation: every `v ∈ I_{m_i}` with `level_v = m_i` has `dist_v = D`.
    pub fn dist_saturated(&self, cfg: &Configuration, i: usize) -> bool {
        let m = &self.ladder.values[i];
        let d = self.topology.max_path_len();
        self.ladder.i_sets[i].iter().all(|&v| cfg[v].level != *m || cfg[v].dist == d)
    }

    /// Level decay: every `v ∈ I_{m_i}` has `level_v ≺ m_i`.
    pub fn level_decayed(&self, cfg: &Configuration, i: usize) -> bool {
        let m = &self.ladder.values[i];
        self.ladder.i_sets[i].iter().all(|&v| self.metric.precedes(&cfg[v].level, m))
    }

    /// Edges `(u, v)` breaking `met(best(u), w_{u,v}) ⪯ best(v)`.
    pub fn neighborhood_bound_violations(&self) -> Vec<(ProcessId, ProcessId)> {
        let t = self.topology;
        let mut out = Vec::new();
        for v in t.processes() {
            for &u in t.nbrs(v) {
                let carried = self.metric.compose(&self.best[u.0], t.weight(u, v).expect("edge"));
                if !self.metric.precedes_or_eq(&carried, &self.best[v.0]) {
                    out.push((u, v));
                }
            }
        }
        out
    }
}
