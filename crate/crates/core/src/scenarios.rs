//! The impossibility constructions and the six-node example systems, as
//! runnable scenarios.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use thiserror::Error;

use crate::analysis::{containment_area, AnalysisError, ContainmentArea};
use crate::faults::AdversaryStrategy;
use crate::metric::{fixed_points, single_valued, Flow, MetricError, MetricValue, Reliability, SharedMetric, ShortestPath, Weight};
use crate::protocol::{Configuration, ProcessState};
use crate::runtime::{DaemonKind, Engine, InitialConfig, RuntimeError, Scenario, Trace};
use crate::scenario_file::ScenarioFile;
use crate::topology::{ProcessId, Topology};

#[derive(Debug, Error)]
pub enum ScenarioBuildError {
    #[error("unknown case {0:?} (expected single-valued, fixed-point or non-fixed-point)")]
    UnknownCase(String),
    #[error("metric {metric} does not qualify: {reason}")]
    Capability { metric: String, reason: String },
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Runtime(#[from] RuntimeError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CaseId {
    SingleValued,
    FixedPoint,
    NonFixedPoint,
}

impl CaseId {
    pub const ALL: [CaseId; 3] = [CaseId::SingleValued, CaseId::FixedPoint, CaseId::NonFixedPoint];

    pub fn name(self) -> &'static str {
        match self {
            CaseId::SingleValued => "single-valued",
            CaseId::FixedPoint => "fixed-point",
            CaseId::NonFixedPoint => "non-fixed-point",
        }
    }
}

impl fmt::Display for CaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CaseId {
    type Err = ScenarioBuildError;

    fn from_str(s: &str) -> Result<Self, ScenarioBuildError> {
        CaseId::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| ScenarioBuildError::UnknownCase(s.to_string()))
    }
}

/// The state a process must reach; several parents may be acceptable.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TargetState {
    pub process: ProcessId,
    pub parents: Vec<Option<ProcessId>>,
    pub level: MetricValue,
    pub dist: usize,
}

impl TargetState {
    pub fn matches(&self, s: &ProcessState) -> bool {
        self.parents.contains(&s.prnt) && s.level == self.level && s.dist == self.dist
    }
}

/// An impossibility construction: a start configuration that looks legitimate outside
/// `S_B`, and the processes a Byzantine process acting correctly disturbs.
#[derive(Clone, Debug)]
pub struct CounterexampleCase {
    pub id: CaseId,
    pub scenario: Scenario,
    pub expected_disturbed: BTreeSet<ProcessId>,
    pub target: Vec<TargetState>,
}

#[derive(Clone, Debug)]
pub struct CaseOutcome {
    pub trace: Trace,
    /// Correct processes that changed an O-variable.
    pub disturbed: BTreeSet<ProcessId>,
    pub reached_target: bool,
    pub area: ContainmentArea,
}

impl CounterexampleCase {
    pub fn initial(&self) -> &Configuration {
        match &self.scenario.init {
            InitialConfig::Explicit(cfg) => cfg,
            InitialConfig::Random => unreachable!("cases start from a fixed configuration"),
        }
    }

    pub fn area(&self) -> Result<ContainmentArea, AnalysisError> {
        containment_area(&self.scenario.topology, &*self.scenario.metric, &self.scenario.byzantine)
    }

    pub fn run(&self) -> Result<CaseOutcome, ScenarioBuildError> {
        let mut engine = Engine::new(&self.scenario)?;
        let outcome = engine.run_default()?;
        let trace = outcome.trace;
        let disturbed = trace
            .steps
            .iter()
            .flat_map(|s| s.changes.iter().map(|c| c.process))
            .filter(|v| !self.scenario.byzantine.contains(v))
            .collect();
        let reached_target = self.target.iter().all(|t| t.matches(&trace.final_config[t.process]));
        Ok(CaseOutcome { trace, disturbed, reached_target, area: self.area()? })
    }

    pub fn to_scenario_file(&self) -> ScenarioFile {
        ScenarioFile::from_scenario(&self.scenario)
    }
}

fn labelled(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

fn case_scenario(topology: Topology, metric: SharedMetric, b: usize, init: Vec<ProcessState>) -> Scenario {
    let mut s = Scenario::new(topology, metric);
    s.byzantine = BTreeSet::from([ProcessId(b)]);
    s.strategy = AdversaryStrategy::SimulateCorrect;
    s.daemon = DaemonKind::Central;
    s.init = InitialConfig::Explicit(Configuration::new(init));
    s
}

fn st(prnt: Option<usize>, level: &MetricValue, dist: usize) -> ProcessState {
    ProcessState::new(prnt.map(ProcessId), level.clone(), dist)
}

fn target(process: usize, parents: &[usize], level: &MetricValue, dist: usize) -> TargetState {
    TargetState {
        process: ProcessId(process),
        parents: parents.iter().map(|&p| Some(ProcessId(p))).collect(),
        level: level.clone(),
        dist,
    }
}

fn root_target(mr: &MetricValue) -> TargetState {
    TargetState { process: ProcessId(0), parents: vec![None], level: mr.clone(), dist: 0 }
}

/// Path `r – u – v – b` under a one-value metric, starting with `u` and `v`
/// hanging from `b`.
pub fn build_case_single_valued() -> CounterexampleCase {
    let metric = single_valued();
    let m = MetricValue::label("m");
    let w = Weight::label("w");
    let topology = Topology::from_edges(4, 0, [(0, 1, w.clone()), (1, 2, w.clone()), (2, 3, w)])
        .with_labels(labelled(&["r", "u", "v", "b"]))
        .with_max_path_len(4);
    let init = vec![st(None, &m, 0), st(Some(2), &m, 2), st(Some(3), &m, 1), st(None, &m, 0)];
    CounterexampleCase {
        id: CaseId::SingleValued,
        scenario: case_scenario(topology, Arc::new(metric), 3, init),
        expected_disturbed: BTreeSet::from([ProcessId(1), ProcessId(2)]),
        target: vec![root_target(&m), target(1, &[0], &m, 1), target(2, &[1], &m, 2), target(3, &[2], &m, 3)],
    }
}

/// Same path with a fixed point `m = met(mr, w) ≺ mr`: `w_{r,u} = w_{v,b} = w`
/// and `w_{u,v} = w′`.
pub fn build_case_fixed_point(metric: SharedMetric) -> Result<CounterexampleCase, ScenarioBuildError> {
    let no = |reason: &str| ScenarioBuildError::Capability { metric: metric.name(), reason: reason.into() };
    let weights = metric.weights().ok_or_else(|| no("weights are not enumerable"))?;
    let fixed = fixed_points(&*metric)?;
    let mr = metric.root_value();
    let (w, m) = weights
        .iter()
        .find_map(|w| {
            let m = metric.compose(&mr, w);
            (metric.precedes(&m, &mr) && fixed.contains(&m)).then(|| (w.clone(), m))
        })
        .ok_or_else(|| no("no weight leads from mr to a fixed point below mr"))?;
    let w2 = weights.iter().find(|x| **x != w).cloned().unwrap_or_else(|| w.clone());
    let topology = Topology::from_edges(4, 0, [(0, 1, w.clone()), (1, 2, w2), (2, 3, w)])
        .with_labels(labelled(&["r", "u", "v", "b"]))
        .with_max_path_len(4);
    let init = vec![st(None, &mr, 0), st(Some(2), &m, 2), st(Some(3), &m, 1), st(None, &mr, 0)];
    let tgt = vec![root_target(&mr), target(1, &[0], &m, 1), target(2, &[1], &m, 2), target(3, &[2], &m, 3)];
    Ok(CounterexampleCase {
        id: CaseId::FixedPoint,
        scenario: case_scenario(topology, metric, 3, init),
        expected_disturbed: BTreeSet::from([ProcessId(1), ProcessId(2)]),
        target: tgt,
    })
}

/// Diamond `r – u – {v, v′} – b` where `m = met(mr, w)` is not a fixed point
/// because `met(m, w′) ≺ m`.
pub fn build_case_non_fixed_point(
    metric: SharedMetric,
    w: Weight,
    w2: Weight,
) -> Result<CounterexampleCase, ScenarioBuildError> {
    let no = |reason: String| ScenarioBuildError::Capability { metric: metric.name(), reason };
    let mr = metric.root_value();
    let m = metric.met(&mr, &w)?;
    let m1 = metric.met(&m, &w2)?;
    if !metric.precedes(&m1, &m) {
        return Err(no(format!("met({m}, {w2}) = {m1} is not below {m}")));
    }
    let m2 = metric.met(&m1, &w)?;
    let topology = Topology::from_edges(
        5,
        0,
        [(0, 1, w.clone()), (1, 2, w2.clone()), (1, 3, w2), (2, 4, w.clone()), (3, 4, w)],
    )
    .with_labels(labelled(&["r", "u", "v", "v'", "b"]))
    .with_max_path_len(5);
    let init = vec![st(None, &mr, 0), st(Some(0), &m, 1), st(Some(4), &m, 1), st(Some(4), &m, 1), st(None, &mr, 0)];
    Ok(CounterexampleCase {
        id: CaseId::NonFixedPoint,
        scenario: case_scenario(topology, metric, 4, init),
        expected_disturbed: BTreeSet::from([ProcessId(2), ProcessId(3)]),
        target: vec![
            root_target(&mr),
            target(1, &[0], &m, 1),
            target(2, &[1], &m1, 2),
            target(3, &[1], &m1, 2),
            target(4, &[2, 3], &m2, 3),
        ],
    })
}

/// The default instance of each case: the one-value metric, `Flow(10)` with
/// weight 0, and SP with unit weights.
pub fn build_case(id: CaseId) -> Result<CounterexampleCase, ScenarioBuildError> {
    match id {
        CaseId::SingleValued => Ok(build_case_single_valued()),
        CaseId::FixedPoint => build_case_fixed_point(Arc::new(Flow::new(10))),
        CaseId::NonFixedPoint => build_case_non_fixed_point(Arc::new(ShortestPath::new()), Weight::Nat(1), Weight::Nat(1)),
    }
}

/// One of the six-node example systems with its computed containment area.
#[derive(Clone, Debug)]
pub struct FigureExample {
    pub name: String,
    pub topology: Topology,
    pub metric: SharedMetric,
    pub byzantine: BTreeSet<ProcessId>,
    pub area: ContainmentArea,
}

impl FigureExample {
    pub fn scenario(&self) -> Scenario {
        let mut s = Scenario::new(self.topology.clone(), self.metric.clone());
        s.byzantine = self.byzantine.clone();
        s
    }

    pub fn to_scenario_file(&self) -> ScenarioFile {
        ScenarioFile::from_scenario(&self.scenario())
    }
}

const FIGURE_NODES: [&str; 6] = ["r", "A", "B", "C", "D", "b"];

fn figure_topology(edges: &[(&str, &str, Weight)]) -> Topology {
    let id = |name: &str| FIGURE_NODES.iter().position(|x| *x == name).expect("figure node");
    Topology::from_edges(6, 0, edges.iter().map(|(u, v, w)| (id(u), id(v), w.clone())))
        .with_labels(labelled(&FIGURE_NODES))
}

fn figure(name: &str, metric: SharedMetric, edges: &[(&str, &str, Weight)]) -> Result<FigureExample, AnalysisError> {
    let topology = figure_topology(edges);
    let byzantine = BTreeSet::from([ProcessId(5)]);
    let area = containment_area(&topology, &*metric, &byzantine)?;
    Ok(FigureExample { name: name.into(), topology, metric, byzantine, area })
}

/// Left and right systems for shortest path, flow (`mr = 10`) and
/// reliability (`mr = 1`); Byzantine process `b`. Flow weights above `mr`
/// are clamped to `mr`, which leaves every `min` unchanged.
pub fn build_figure_examples() -> Result<Vec<FigureExample>, AnalysisError> {
    let n = Weight::Nat;
    let flow = |x: u64| Weight::Nat(x.min(10));
    let rel = |p: i64, q: i64| Weight::real(p, q);
    Ok(vec![
        figure(
            "sp-left",
            Arc::new(ShortestPath::new()),
            &[
                ("r", "A", n(7)),
                ("r", "B", n(6)),
                ("A", "B", n(5)),
                ("B", "D", n(4)),
                ("A", "D", n(10)),
                ("C", "D", n(8)),
                ("A", "C", n(6)),
                ("D", "b", n(32)),
                ("C", "b", n(16)),
            ],
        )?,
        figure(
            "sp-right",
            Arc::new(ShortestPath::new()),
            &[
                ("r", "A", n(0)),
                ("r", "B", n(0)),
                ("A", "B", n(0)),
                ("B", "D", n(0)),
                ("A", "D", n(0)),
                ("C", "D", n(0)),
                ("A", "C", n(0)),
                ("D", "b", n(0)),
                ("C", "b", n(0)),
            ],
        )?,
        figure(
            "flow-left",
            Arc::new(Flow::new(10)),
            &[
                ("r", "A", flow(7)),
                ("r", "B", flow(6)),
                ("A", "B", flow(5)),
                ("B", "D", flow(4)),
                ("A", "D", flow(10)),
                ("C", "D", flow(8)),
                ("A", "C", flow(6)),
                ("D", "b", flow(32)),
                ("C", "b", flow(16)),
            ],
        )?,
        figure(
            "flow-right",
            Arc::new(Flow::new(10)),
            &[
                ("r", "A", flow(7)),
                ("r", "B", flow(10)),
                ("A", "B", flow(6)),
                ("A", "D", flow(5)),
                ("A", "C", flow(3)),
                ("B", "D", flow(13)),
                ("C", "D", flow(1)),
                ("C", "b", flow(11)),
                ("D", "b", flow(12)),
            ],
        )?,
        figure(
            "reliability-left",
            Arc::new(Reliability::new()),
            &[
                ("r", "A", rel(3, 4)),
                ("r", "B", rel(3, 4)),
                ("C", "b", rel(3, 4)),
                ("D", "b", rel(3, 4)),
                ("C", "D", rel(1, 1)),
                ("A", "B", rel(1, 1)),
                ("A", "D", rel(4, 5)),
                ("A", "C", rel(2, 5)),
                ("B", "D", rel(3, 10)),
            ],
        )?,
        figure(
            "reliability-right",
            Arc::new(Reliability::new()),
            &[
                ("r", "A", rel(1, 4)),
                ("A", "B", rel(1, 4)),
                ("r", "B", rel(3, 4)),
                ("B", "D", rel(1, 1)),
                ("A", "D", rel(1, 2)),
                ("C", "D", rel(1, 1)),
                ("A", "C", rel(1, 4)),
                ("D", "b", rel(3, 4)),
                ("C", "b", rel(1, 2)),
            ],
        )?,
    ])
}
