//! The SSMAX state machine: O-variables, guards, rule bodies and the
//! round-robin `choose` macro.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Index;

use thiserror::Error;

use crate::metric::{MetricSpace, MetricValue};
use crate::topology::{ProcessId, Topology};

/// The O-variables of one process.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ProcessState {
    /// `None` is `⊥`.
    pub prnt: Option<ProcessId>,
    pub level: MetricValue,
    pub dist: usize,
}

impl ProcessState {
    pub fn new(prnt: Option<ProcessId>, level: MetricValue, dist: usize) -> Self {
        ProcessState { prnt, level, dist }
    }

    /// `(⊥, level, 0)`, the chain-root shape.
    pub fn rooted(level: MetricValue) -> Self {
        ProcessState { prnt: None, level, dist: 0 }
    }
}

impl fmt::Display for ProcessState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.prnt {
            Some(p) => write!(f, "(prnt={p}, level={}, dist={})", self.level, self.dist),
            None => write!(f, "(prnt=⊥, level={}, dist={})", self.level, self.dist),
        }
    }
}

/// The product of all process states, Byzantine processes included.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Configuration {
    states: Vec<ProcessState>,
}

impl Configuration {
    pub fn new(states: Vec<ProcessState>) -> Self {
        Configuration { states }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn get(&self, v: ProcessId) -> Option<&ProcessState> {
        self.states.get(v.0)
    }

    pub fn set(&mut self, v: ProcessId, state: ProcessState) {
        self.states[v.0] = state;
    }

    pub fn states(&self) -> &[ProcessState] {
        &self.states
    }

    pub fn iter(&self) -> impl Iterator<Item = (ProcessId, &ProcessState)> {
        self.states.iter().enumerate().map(|(i, s)| (ProcessId(i), s))
    }
}

impl Index<ProcessId> for Configuration {
    type Output = ProcessState;

    fn index(&self, v: ProcessId) -> &ProcessState {
        &self.states[v.0]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RuleId {
    Rr,
    R1,
    R2,
    R3,
}

impl RuleId {
    /// Default firing priority when several guards hold. R2 precedes R1:
    /// with an unbounded `M`, two processes that are each other's parent at
    /// `dist = D` can otherwise fire R1 forever.
    pub const PRIORITY: [RuleId; 4] = [RuleId::Rr, RuleId::R2, RuleId::R1, RuleId::R3];

    /// Local repair first (Rr > R1 > R2 > R3), for experiments.
    pub const REPAIR_FIRST: [RuleId; 4] = [RuleId::Rr, RuleId::R1, RuleId::R2, RuleId::R3];

    fn bit(self) -> u8 {
        match self {
            RuleId::Rr => 1,
            RuleId::R1 => 2,
            RuleId::R2 => 4,
            RuleId::R3 => 8,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RuleId::Rr => "Rr",
            RuleId::R1 => "R1",
            RuleId::R2 => "R2",
            RuleId::R3 => "R3",
        }
    }
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The set of rules whose guards hold for one process.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EnabledRules(u8);

impl EnabledRules {
    pub fn insert(&mut self, rule: RuleId) {
        self.0 |= rule.bit();
    }

    pub fn contains(self, rule: RuleId) -> bool {
        self.0 & rule.bit() != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = RuleId> {
        RuleId::PRIORITY.into_iter().filter(move |r| self.contains(*r))
    }

    /// First enabled rule in `order`.
    pub fn pick(self, order: &[RuleId]) -> Option<RuleId> {
        order.iter().copied().find(|r| self.contains(*r))
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProtocolError {
    #[error("rule {rule} is not enabled at process {process}")]
    RuleNotEnabled { process: ProcessId, rule: RuleId },
    #[error("choose called with no candidates at process {0}")]
    NoCandidates(ProcessId),
    #[error("candidate {candidate} is not a neighbor of {process}")]
    NotANeighbor { process: ProcessId, candidate: ProcessId },
    #[error("configuration has {found} states for {expected} processes")]
    SizeMismatch { expected: usize, found: usize },
    #[error("process {process}: {reason}")]
    Domain { process: ProcessId, reason: String },
}

/// `choose(A)`: the first candidate strictly after `prnt` in `order`,
/// wrapping to the first candidate in `order` when none follows.
///
/// A `prnt` of `⊥` (or one missing from `order`) sits before every neighbor.
pub fn choose_in_order(order: &[ProcessId], prnt: Option<ProcessId>, candidates: &[ProcessId]) -> Option<ProcessId> {
    let cursor = prnt.and_then(|p| order.iter().position(|&u| u == p));
    let mut first = None;
    for (pos, &u) in order.iter().enumerate() {
        if !candidates.contains(&u) {
            continue;
        }
        if first.is_none() {
            first = Some(u);
        }
        match cursor {
            Some(c) if pos <= c => {}
            _ => return Some(u),
        }
    }
    first
}

/// Guard evaluation and rule bodies over a fixed topology and metric.
#[derive(Clone, Copy, Debug)]
pub struct Protocol<'a> {
    topology: &'a Topology,
    metric: &'a dyn MetricSpace,
}

impl<'a> Protocol<'a> {
    pub fn new(topology: &'a Topology, metric: &'a dyn MetricSpace) -> Self {
        Protocol { topology, metric }
    }

    pub fn topology(&self) -> &'a Topology {
        self.topology
    }

    pub fn metric(&self) -> &'a dyn MetricSpace {
        self.metric
    }

    fn bound(&self) -> usize {
        self.topology.max_path_len()
    }

    /// `dist_u < D − 1`, the eligibility filter of R2 and R3.
    fn eligible(&self, cfg: &Configuration, u: ProcessId) -> bool {
        cfg[u].dist + 1 < self.bound()
    }

    /// `met(level_u, w_{u,v})`.
    fn offer(&self, cfg: &Configuration, u: ProcessId, v: ProcessId) -> MetricValue {
        let w = self.topology.weight(u, v).expect("neighbors share an edge");
        self.metric.compose(&cfg[u].level, w)
    }

    fn parent(&self, cfg: &Configuration, v: ProcessId) -> Option<ProcessId> {
        cfg[v].prnt.filter(|p| self.topology.is_neighbor(v, *p))
    }

    /// Rules whose guards hold at `v`, reading only `v` and `N_v`.
    pub fn enabled_rules(&self, cfg: &Configuration, v: ProcessId) -> EnabledRules {
        let mut out = EnabledRules::default();
        let state = &cfg[v];
        let d = self.bound();
        if v == self.topology.root() {
            if state.level != self.metric.root_value() || state.dist != 0 {
                out.insert(RuleId::Rr);
            }
            return out;
        }
        if let Some(p) = self.parent(cfg, v) {
            let want_dist = (cfg[p].dist + 1).min(d);
            if state.dist != want_dist || state.level != self.offer(cfg, p, v) {
                out.insert(RuleId::R1);
            }
        }
        let neighbors = self.topology.nbrs(v);
        if state.dist == d && neighbors.iter().any(|&u| self.eligible(cfg, u)) {
            out.insert(RuleId::R2);
        }
        if neighbors
            .iter()
            .any(|&u| self.eligible(cfg, u) && self.metric.precedes(&state.level, &self.offer(cfg, u, v)))
        {
            out.insert(RuleId::R3);
        }
        out
    }

    /// The rule `v` fires under `order` (default [`RuleId::PRIORITY`]).
    pub fn priority_rule(&self, cfg: &Configuration, v: ProcessId, order: &[RuleId]) -> Option<RuleId> {
        self.enabled_rules(cfg, v).pick(order)
    }

    /// The round-robin `choose` macro at `v`.
    pub fn choose(&self, cfg: &Configuration, v: ProcessId, candidates: &[ProcessId]) -> Result<ProcessId, ProtocolError> {
        let order = self.topology.nbrs(v);
        if let Some(&bad) = candidates.iter().find(|c| !order.contains(c)) {
            return Err(ProtocolError::NotANeighbor { process: v, candidate: bad });
        }
        choose_in_order(order, cfg[v].prnt, candidates).ok_or(ProtocolError::NoCandidates(v))
    }

    /// New state of `v` after firing `rule`; fails unless the rule is enabled.
    pub fn apply_rule(&self, cfg: &Configuration, v: ProcessId, rule: RuleId) -> Result<ProcessState, ProtocolError> {
        if !self.enabled_rules(cfg, v).contains(rule) {
            return Err(ProtocolError::RuleNotEnabled { process: v, rule });
        }
        Ok(self.fire(cfg, v, rule))
    }

    /// Rule body; the guard is assumed to hold.
    pub(crate) fn fire(&self, cfg: &Configuration, v: ProcessId, rule: RuleId) -> ProcessState {
        let d = self.bound();
        let current = &cfg[v];
        match rule {
            RuleId::Rr => ProcessState { prnt: current.prnt, level: self.metric.root_value(), dist: 0 },
            RuleId::R1 => {
                let p = self.parent(cfg, v).expect("R1 guard requires a neighbor parent");
                ProcessState { prnt: Some(p), level: self.offer(cfg, p, v), dist: (cfg[p].dist + 1).min(d) }
            }
            RuleId::R2 => {
                let candidates: Vec<_> =
                    self.topology.nbrs(v).iter().copied().filter(|&u| self.eligible(cfg, u)).collect();
                self.reparent(cfg, v, &candidates)
            }
            RuleId::R3 => {
                let eligible: Vec<_> =
                    self.topology.nbrs(v).iter().copied().filter(|&u| self.eligible(cfg, u)).collect();
                let offers: Vec<_> = eligible.iter().map(|&u| self.offer(cfg, u, v)).collect();
                let (first, rest) = offers.split_first().expect("R3 guard requires an eligible neighbor");
                let best = self.metric.max_of(first, rest.iter()).clone();
                let candidates: Vec<_> = eligible
                    .iter()
                    .zip(&offers)
                    .filter(|(_, offer)| **offer == best)
                    .map(|(&u, _)| u)
                    .collect();
                self.reparent(cfg, v, &candidates)
            }
        }
    }

    fn reparent(&self, cfg: &Configuration, v: ProcessId, candidates: &[ProcessId]) -> ProcessState {
        let p = choose_in_order(self.topology.nbrs(v), cfg[v].prnt, candidates).expect("nonempty candidates");
        ProcessState { prnt: Some(p), level: self.offer(cfg, p, v), dist: cfg[p].dist + 1 }
    }

    /// Fires every `(v, rule)` pair against the pre-step configuration and
    /// writes all results at once.
    pub fn resolve_simultaneous(
        &self,
        cfg: &Configuration,
        chosen: &BTreeMap<ProcessId, RuleId>,
    ) -> Result<Configuration, ProtocolError> {
        let updates = chosen
            .iter()
            .map(|(&v, &rule)| self.apply_rule(cfg, v, rule).map(|s| (v, s)))
            .collect::<Result<Vec<_>, _>>()?;
        let mut next = cfg.clone();
        for (v, s) in updates {
            next.set(v, s);
        }
        Ok(next)
    }

    /// Domain check for one process's state. Byzantine processes may hold
    /// `⊥`; correct non-roots must point at a neighbor; the root holds `⊥`.
    pub fn check_state(&self, v: ProcessId, state: &ProcessState, byzantine: bool) -> Result<(), ProtocolError> {
        let fail = |reason: String| Err(ProtocolError::Domain { process: v, reason });
        if !self.metric.contains_value(&state.level) {
            return fail(format!("level {} outside M", state.level));
        }
        if !self.metric.precedes_or_eq(&state.level, &self.metric.root_value()) {
            return fail(format!("level {} exceeds mr", state.level));
        }
        if state.dist > self.bound() {
            return fail(format!("dist {} exceeds D={}", state.dist, self.bound()));
        }
        match state.prnt {
            None if v == self.topology.root() || byzantine => Ok(()),
            None => fail("non-root correct process with ⊥ parent".into()),
            Some(_) if v == self.topology.root() => fail("root must have ⊥ parent".into()),
            Some(p) if self.topology.is_neighbor(v, p) => Ok(()),
            Some(p) => fail(format!("parent {p} is not a neighbor")),
        }
    }

    /// Domain check for a whole configuration.
    pub fn check_configuration(
        &self,
        cfg: &Configuration,
        is_byzantine: impl Fn(ProcessId) -> bool,
    ) -> Result<(), ProtocolError> {
        if cfg.len() != self.topology.len() {
            return Err(ProtocolError::SizeMismatch { expected: self.topology.len(), found: cfg.len() });
        }
        for (v, s) in cfg.iter() {
            self.check_state(v, s, is_byzantine(v))?;
        }
        Ok(())
    }
}
