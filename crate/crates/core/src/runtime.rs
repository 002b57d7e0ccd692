//! Daemons, the step loop, traces and containment detection.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value as Json};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::analysis::{Analysis, AnalysisError, ContainmentArea};
use crate::faults::{self, AdversaryContext, AdversaryStrategy, FaultError};
use crate::metric::{MetricSpace, SharedMetric};
use crate::protocol::{Configuration, ProcessState, Protocol, ProtocolError, RuleId};
use crate::topology::{ProcessId, Topology, TopologyError};

/// Post-containment steps recorded by default.
pub const DEFAULT_HORIZON: usize = 500;

#[derive(Debug, Error)]
pub enum RuntimeError {
    #[error("invalid scenario: {0}")]
    Validation(String),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Fault(#[from] FaultError),
    #[error("invariant violated: {0}")]
    Invariant(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum DaemonKind {
    Central,
    #[default]
    Synchronous,
    RandomSubset,
    AdversarialFair,
}

impl DaemonKind {
    pub const ALL: [DaemonKind; 4] =
        [DaemonKind::Central, DaemonKind::Synchronous, DaemonKind::RandomSubset, DaemonKind::AdversarialFair];

    pub fn name(self) -> &'static str {
        match self {
            DaemonKind::Central => "central",
            DaemonKind::Synchronous => "synchronous",
            DaemonKind::RandomSubset => "random-subset",
            DaemonKind::AdversarialFair => "adversarial-fair",
        }
    }
}

impl fmt::Display for DaemonKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DaemonKind {
    type Err = RuntimeError;

    fn from_str(s: &str) -> Result<Self, RuntimeError> {
        DaemonKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| RuntimeError::Validation(format!("unknown daemon {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub enum InitialConfig {
    #[default]
    Random,
    Explicit(Configuration),
}

/// Everything needed to reproduce one run.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub topology: Topology,
    pub metric: SharedMetric,
    pub byzantine: BTreeSet<ProcessId>,
    pub strategy: AdversaryStrategy,
    pub daemon: DaemonKind,
    /// `None` means `4n`.
    pub fairness_bound: Option<usize>,
    pub seed: u64,
    /// `None` means `50 · n · |realized values| · F`.
    pub max_steps: Option<usize>,
    pub containment_horizon: usize,
    pub init: InitialConfig,
}

impl Scenario {
    pub fn new(topology: Topology, metric: SharedMetric) -> Self {
        Scenario {
            topology,
            metric,
            byzantine: BTreeSet::new(),
            strategy: AdversaryStrategy::Lure,
            daemon: DaemonKind::Synchronous,
            fairness_bound: None,
            seed: 0,
            max_steps: None,
            containment_horizon: DEFAULT_HORIZON,
            init: InitialConfig::Random,
        }
    }

    pub fn fairness(&self) -> usize {
        self.fairness_bound.unwrap_or(4 * self.topology.len().max(1))
    }

    pub fn validate(&self) -> Result<(), RuntimeError> {
        let t = &self.topology;
        let mut problems: Vec<String> = t.validate().iter().map(|v| v.to_string()).collect();
        problems.extend(t.validate_weights(&*self.metric).iter().map(|v| v.to_string()));
        if !problems.is_empty() {
            return Err(RuntimeError::Validation(problems.join("; ")));
        }
        if self.byzantine.contains(&t.root()) {
            return Err(RuntimeError::Validation(format!("root {} cannot be Byzantine", t.root())));
        }
        if let Some(b) = self.byzantine.iter().find(|b| !t.contains(**b)) {
            return Err(RuntimeError::Validation(format!("Byzantine id {b} out of range")));
        }
        let f = self.fairness();
        if f == 0 {
            return Err(RuntimeError::Validation("fairness bound must be at least 1".into()));
        }
        if self.daemon == DaemonKind::Central && f < t.len() {
            return Err(RuntimeError::Validation(format!(
                "the central daemon needs a fairness bound of at least n={} (got {f})",
                t.len()
            )));
        }
        if self.max_steps == Some(0) {
            return Err(RuntimeError::Validation("max_steps must be at least 1".into()));
        }
        if let InitialConfig::Explicit(cfg) = &self.init {
            Protocol::new(t, &*self.metric).check_configuration(cfg, |v| self.byzantine.contains(&v))?;
        }
        Ok(())
    }
}

/// What an activated process did.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Action {
    Rule(RuleId),
    ByzantineWrite,
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Rule(r) => write!(f, "{r}"),
            Action::ByzantineWrite => f.write_str("byzantine"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Change {
    pub process: ProcessId,
    pub old: ProcessState,
    pub new: ProcessState,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StepRecord {
    /// Index of the configuration this step produced.
    pub index: usize,
    /// Enabled correct processes and eligible Byzantine ones, before the step.
    pub eligible: Vec<ProcessId>,
    pub activated: Vec<ProcessId>,
    pub actions: Vec<(ProcessId, Action)>,
    pub changes: Vec<Change>,
    pub digest: String,
}

/// Predicate outcomes for one configuration; vectors are indexed by rung.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Annotation {
    pub im: Vec<bool>,
    pub lc: Vec<bool>,
    pub dist_saturated: Vec<bool>,
    pub level_decayed: Vec<bool>,
    /// Every correct process outside `S_B` satisfies its predicate.
    pub sb_spec: bool,
    /// Enabled correct processes.
    pub enabled: usize,
}

impl Annotation {
    pub fn legitimate(&self) -> bool {
        *self.lc.last().expect("ladder has a rung")
    }

    fn same_predicates(&self, other: &Annotation) -> bool {
        self.im == other.im && self.lc == other.lc && self.sb_spec == other.sb_spec
    }
}

pub fn annotate(analysis: &Analysis<'_>, cfg: &Configuration) -> Annotation {
    let protocol = Protocol::new(analysis.topology(), analysis.metric());
    let spec = analysis.spec_vector(cfg);
    let ladder = analysis.ladder();
    let im: Vec<bool> = ladder.values.iter().map(|m| analysis.check_im(cfg, m)).collect();
    let lc = (0..ladder.len())
        .map(|i| im[i] && ladder.v_sets[i].iter().all(|v| spec[v.0]))
        .collect();
    let dist_saturated = (0..ladder.len()).map(|i| analysis.dist_saturated(cfg, i)).collect();
    let level_decayed = (0..ladder.len()).map(|i| analysis.level_decayed(cfg, i)).collect();
    let sb_spec = analysis.sb_correct().iter().all(|v| spec[v.0]);
    let enabled = analysis
        .topology()
        .processes()
        .filter(|&v| !analysis.is_byzantine(v) && !protocol.enabled_rules(cfg, v).is_empty())
        .count();
    Annotation { im, lc, dist_saturated, level_decayed, sb_spec, enabled }
}

/// SHA-256 of the canonical text form of a configuration.
pub fn digest(cfg: &Configuration) -> String {
    let mut hasher = Sha256::new();
    for (v, s) in cfg.iter() {
        let prnt = s.prnt.map_or_else(|| "-".to_string(), |p| p.to_string());
        hasher.update(format!("{v}:{prnt}|{}|{};", s.level, s.dist).as_bytes());
    }
    hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trace {
    pub initial: Configuration,
    pub initial_digest: String,
    pub steps: Vec<StepRecord>,
    /// One per configuration: `annotations[i]` describes configuration `i`.
    pub annotations: Vec<Annotation>,
    /// Full states at the first configuration, wherever predicate outcomes
    /// change, and at the last configuration.
    pub snapshots: BTreeMap<usize, Configuration>,
    pub final_config: Configuration,
    /// The run ended because nothing was eligible.
    pub silent: bool,
}

impl Trace {
    /// Every configuration, rebuilt from the recorded changes.
    pub fn configurations(&self) -> Vec<Configuration> {
        let mut out = Vec::with_capacity(self.steps.len() + 1);
        let mut cfg = self.initial.clone();
        out.push(cfg.clone());
        for step in &self.steps {
            for c in &step.changes {
                cfg.set(c.process, c.new.clone());
            }
            out.push(cfg.clone());
        }
        out
    }

    fn state_json(ms: &dyn MetricSpace, s: &ProcessState) -> Json {
        json!({ "prnt": s.prnt.map(|p| p.0), "level": ms.value_to_json(&s.level), "dist": s.dist })
    }

    fn snapshot_json(ms: &dyn MetricSpace, cfg: &Configuration) -> Json {
        Json::Array(cfg.states().iter().map(|s| Self::state_json(ms, s)).collect())
    }

    /// One JSON object per line: the initial configuration, then one line per
    /// step with the activated set, fired actions and old→new variables.
    pub fn write_jsonl(&self, ms: &dyn MetricSpace, out: &mut dyn Write) -> io::Result<()> {
        let head = json!({
            "step": 0,
            "digest": self.initial_digest,
            "snapshot": Self::snapshot_json(ms, &self.initial),
        });
        writeln!(out, "{head}")?;
        for step in &self.steps {
            let fired: Vec<Json> = step
                .actions
                .iter()
                .map(|(v, a)| json!({ "process": v.0, "action": a.to_string() }))
                .collect();
            let changes: Vec<Json> = step
                .changes
                .iter()
                .map(|c| {
                    let mut m = serde_json::Map::new();
                    m.insert("process".into(), json!(c.process.0));
                    if c.old.prnt != c.new.prnt {
                        m.insert("prnt".into(), json!([c.old.prnt.map(|p| p.0), c.new.prnt.map(|p| p.0)]));
                    }
                    if c.old.level != c.new.level {
                        m.insert("level".into(), json!([ms.value_to_json(&c.old.level), ms.value_to_json(&c.new.level)]));
                    }
                    if c.old.dist != c.new.dist {
                        m.insert("dist".into(), json!([c.old.dist, c.new.dist]));
                    }
                    Json::Object(m)
                })
                .collect();
            let mut line = json!({
                "step": step.index,
                "activated": step.activated.iter().map(|v| v.0).collect::<Vec<_>>(),
                "fired": fired,
                "changes": changes,
                "digest": step.digest,
            });
            if let Some(cfg) = self.snapshots.get(&step.index) {
                line["snapshot"] = Self::snapshot_json(ms, cfg);
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ContainmentMode {
    ExactLc,
    Horizon,
}

impl fmt::Display for ContainmentMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ContainmentMode::ExactLc => "exact-LC",
            ContainmentMode::Horizon => "horizon",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ContainmentVerdict {
    pub first_contained_step: Option<usize>,
    pub mode: ContainmentMode,
    pub horizon: usize,
}

impl ContainmentVerdict {
    pub fn contained(&self) -> bool {
        self.first_contained_step.is_some()
    }
}

/// Earliest configuration from which every correct process outside `S_B`
/// holds its predicate and keeps its O-variables for the next
/// `min(K, remaining)` steps. Entering `𝓛𝓒` short-circuits.
pub fn detect_containment(trace: &Trace, area: &ContainmentArea, k: usize) -> ContainmentVerdict {
    if let Some(i) = trace.annotations.iter().position(Annotation::legitimate) {
        return ContainmentVerdict { first_contained_step: Some(i), mode: ContainmentMode::ExactLc, horizon: k };
    }
    let watched = |v: ProcessId| !area.byzantine.contains(&v) && !area.members.contains(&v);
    let total = trace.steps.len();
    let window = k.min(total);
    // Prefix counts of bad configurations and of steps touching watched processes.
    let mut bad_cfg = vec![0usize; total + 2];
    for (i, a) in trace.annotations.iter().enumerate() {
        bad_cfg[i + 1] = bad_cfg[i] + usize::from(!a.sb_spec);
    }
    let mut bad_step = vec![0usize; total + 1];
    for (i, s) in trace.steps.iter().enumerate() {
        bad_step[i + 1] = bad_step[i] + usize::from(s.changes.iter().any(|c| watched(c.process)));
    }
    let first = (0..=total - window).find(|&j| {
        bad_cfg[j + window + 1] - bad_cfg[j] == 0 && bad_step[j + window] - bad_step[j] == 0
    });
    ContainmentVerdict { first_contained_step: first, mode: ContainmentMode::Horizon, horizon: k }
}

/// First-satisfaction indices for one ladder rung.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RungProgress {
    pub lc: Option<usize>,
    /// First index at or after `lc` where dist saturation holds.
    pub dist_saturated: Option<usize>,
    /// First index at or after `lc` where level decay holds.
    pub level_decayed: Option<usize>,
}

pub fn ladder_progress(trace: &Trace) -> Vec<RungProgress> {
    let rungs = trace.annotations.first().map_or(0, |a| a.lc.len());
    (0..rungs)
        .map(|i| {
            let lc = trace.annotations.iter().position(|a| a.lc[i]);
            let after = |pick: fn(&Annotation, usize) -> bool| {
                lc.and_then(|start| {
                    trace.annotations[start..].iter().position(|a| pick(a, i)).map(|off| start + off)
                })
            };
            RungProgress {
                lc,
                dist_saturated: after(|a, i| a.dist_saturated[i]),
                level_decayed: after(|a, i| a.level_decayed[i]),
            }
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClosurePredicate {
    Im(usize),
    Lc(usize),
}

/// `Ok` if the predicate, once true, stays true; otherwise the first index
/// where it falls back to false.
pub fn check_closure(trace: &Trace, predicate: ClosurePredicate) -> Result<(), usize> {
    closure_of(trace.annotations.iter().map(|a| match predicate {
        ClosurePredicate::Im(i) => a.im[i],
        ClosurePredicate::Lc(i) => a.lc[i],
    }))
}

pub fn closure_of(bits: impl IntoIterator<Item = bool>) -> Result<(), usize> {
    let mut seen = false;
    for (i, b) in bits.into_iter().enumerate() {
        if b {
            seen = true;
        } else if seen {
            return Err(i);
        }
    }
    Ok(())
}

/// Every `IM` and `LC` rung, checked for closure. Returns the violations.
pub fn closure_violations(trace: &Trace) -> Vec<(ClosurePredicate, usize)> {
    let rungs = trace.annotations.first().map_or(0, |a| a.lc.len());
    (0..rungs)
        .flat_map(|i| [ClosurePredicate::Im(i), ClosurePredicate::Lc(i)])
        .filter_map(|p| check_closure(trace, p).err().map(|at| (p, at)))
        .collect()
}

/// Longest run of consecutive steps in which a process was eligible but not
/// activated, as `(process, length)`; `None` for an empty trace.
pub fn longest_wait(trace: &Trace) -> Option<(ProcessId, usize)> {
    let n = trace.initial.len();
    let mut current = vec![0usize; n];
    let mut worst: Option<(ProcessId, usize)> = None;
    for step in &trace.steps {
        for (v, wait) in current.iter_mut().enumerate() {
            let id = ProcessId(v);
            if step.eligible.contains(&id) && !step.activated.contains(&id) {
                *wait += 1;
            } else {
                *wait = 0;
            }
            if worst.is_none_or(|(_, w)| *wait > w) {
                worst = Some((id, *wait));
            }
        }
    }
    worst
}

/// Recomputes every fired rule against its pre-step configuration and checks
/// that only activated processes changed.
pub fn replay_check(trace: &Trace, protocol: &Protocol<'_>) -> Result<(), String> {
    let configs = trace.configurations();
    for (step, pair) in trace.steps.iter().zip(configs.windows(2)) {
        let (before, after) = (&pair[0], &pair[1]);
        for (v, s) in after.iter() {
            let activated = step.activated.contains(&v);
            if !activated && *s != before[v] {
                return Err(format!("step {}: process {v} changed without activation", step.index));
            }
        }
        for (v, action) in &step.actions {
            if let Action::Rule(rule) = action {
                let expected = protocol.apply_rule(before, *v, *rule).map_err(|e| format!("step {}: {e}", step.index))?;
                if expected != after[*v] {
                    return Err(format!("step {}: {v} fired {rule} but state differs", step.index));
                }
            }
        }
        if digest(after) != step.digest {
            return Err(format!("step {}: digest mismatch", step.index));
        }
    }
    Ok(())
}

/// A configuration drawn uniformly from the variable domains.
pub fn random_configuration(
    t: &Topology,
    ms: &dyn MetricSpace,
    byzantine: &BTreeSet<ProcessId>,
    rng: &mut ChaCha8Rng,
) -> Result<Configuration, RuntimeError> {
    let d = t.max_path_len();
    let mut states = Vec::with_capacity(t.len());
    for v in t.processes() {
        let level = faults::sample_level(ms, rng)
            .ok_or_else(|| RuntimeError::Validation(format!("metric {} cannot be sampled", ms.name())))?;
        let dist = rng.gen_range(0..=d);
        let prnt = if v == t.root() {
            None
        } else {
            let mut options: Vec<Option<ProcessId>> = t.nbrs(v).iter().map(|&u| Some(u)).collect();
            if byzantine.contains(&v) || options.is_empty() {
                options.push(None);
            }
            *options.choose(rng).expect("nonempty")
        };
        states.push(ProcessState::new(prnt, level, dist));
    }
    Ok(Configuration::new(states))
}

const DAEMON_STREAM: u64 = 1;
const INIT_STREAM: u64 = 2;
const BYZANTINE_STREAM_BASE: u64 = 1 << 32;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub trace: Trace,
    pub verdict: ContainmentVerdict,
    pub max_steps: usize,
}

/// One simulation: owns the configuration, the daemon state and the
/// per-Byzantine random streams.
pub struct Engine<'a> {
    scenario: &'a Scenario,
    protocol: Protocol<'a>,
    analysis: Analysis<'a>,
    fairness: usize,
    rule_order: [RuleId; 4],
    config: Configuration,
    waiting: Vec<usize>,
    daemon_rng: ChaCha8Rng,
    byzantine_rngs: BTreeMap<ProcessId, ChaCha8Rng>,
    steps_taken: usize,
}

impl<'a> Engine<'a> {
    pub fn new(scenario: &'a Scenario) -> Result<Self, RuntimeError> {
        scenario.validate()?;
        let t = &scenario.topology;
        let ms: &'a dyn MetricSpace = &*scenario.metric;
        let analysis = Analysis::new(t, ms, &scenario.byzantine)?;
        let config = match &scenario.init {
            InitialConfig::Explicit(cfg) => cfg.clone(),
            InitialConfig::Random => {
                random_configuration(t, ms, &scenario.byzantine, &mut stream(scenario.seed, INIT_STREAM))?
            }
        };
        let byzantine_rngs = scenario
            .byzantine
            .iter()
            .map(|&b| (b, stream(scenario.seed, BYZANTINE_STREAM_BASE + b.0 as u64)))
            .collect();
        Ok(Engine {
            scenario,
            protocol: Protocol::new(t, ms),
            analysis,
            fairness: scenario.fairness(),
            rule_order: RuleId::PRIORITY,
            config,
            waiting: vec![0; t.len()],
            daemon_rng: stream(scenario.seed, DAEMON_STREAM),
            byzantine_rngs,
            steps_taken: 0,
        })
    }

    /// Overrides which enabled rule a correct process fires.
    pub fn with_rule_order(mut self, order: [RuleId; 4]) -> Self {
        self.rule_order = order;
        self
    }

    pub fn config(&self) -> &Configuration {
        &self.config
    }

    pub fn analysis(&self) -> &Analysis<'a> {
        &self.analysis
    }

    pub fn protocol(&self) -> &Protocol<'a> {
        &self.protocol
    }

    pub fn steps_taken(&self) -> usize {
        self.steps_taken
    }

    /// `max_steps` from the scenario or the default ceiling.
    pub fn budget(&self) -> usize {
        self.scenario.max_steps.unwrap_or_else(|| {
            50 * self.scenario.topology.len() * self.analysis.ladder().len() * self.fairness
        })
    }

    fn is_byzantine(&self, v: ProcessId) -> bool {
        self.scenario.byzantine.contains(&v)
    }

    fn context(&self, b: ProcessId) -> AdversaryContext<'_> {
        AdversaryContext {
            protocol: self.protocol,
            config: &self.config,
            process: b,
            step: self.steps_taken,
            weakest: self.analysis.ladder().values.last().expect("ladder has a rung"),
        }
    }

    fn select(&mut self, eligible: &[ProcessId]) -> Vec<ProcessId> {
        let n = self.scenario.topology.len();
        let f = self.fairness;
        let waiting = &self.waiting;
        let most_waiting = |set: &mut dyn Iterator<Item = ProcessId>| {
            set.fold(None::<ProcessId>, |best, v| match best {
                Some(b) if waiting[b.0] >= waiting[v.0] => Some(b),
                _ => Some(v),
            })
        };
        let forced = |slack: usize| -> Vec<ProcessId> {
            eligible.iter().copied().filter(|v| waiting[v.0] + slack >= f).collect()
        };
        match self.scenario.daemon {
            DaemonKind::Synchronous => eligible.to_vec(),
            DaemonKind::Central => {
                // Serving the longest waiter once anyone is within n steps of
                // the bound keeps every wait below F.
                let urgent = forced(n);
                match most_waiting(&mut urgent.into_iter()) {
                    Some(v) => vec![v],
                    None => vec![*eligible.choose(&mut self.daemon_rng).expect("nonempty")],
                }
            }
            DaemonKind::RandomSubset => {
                let must = forced(1);
                let mut out: Vec<ProcessId> = eligible
                    .iter()
                    .copied()
                    .filter(|v| must.contains(v) || self.daemon_rng.gen_bool(0.5))
                    .collect();
                if out.is_empty() {
                    out.push(*eligible.choose(&mut self.daemon_rng).expect("nonempty"));
                }
                out
            }
            DaemonKind::AdversarialFair => {
                let must = forced(1);
                let byz = &self.scenario.byzantine;
                let out: Vec<ProcessId> =
                    eligible.iter().copied().filter(|v| byz.contains(v) || must.contains(v)).collect();
                if !out.is_empty() {
                    return out;
                }
                vec![most_waiting(&mut eligible.iter().copied()).expect("nonempty")]
            }
        }
    }

    /// One daemon step. Returns `None` when nothing is eligible.
    pub fn step(&mut self) -> Result<Option<StepRecord>, RuntimeError> {
        let mut eligible = Vec::new();
        let mut rules = BTreeMap::new();
        let mut simulated = BTreeMap::new();
        for v in self.scenario.topology.processes() {
            if self.is_byzantine(v) {
                if self.scenario.strategy == AdversaryStrategy::SimulateCorrect {
                    let s = faults::simulate_correct(&self.context(v));
                    if s != self.config[v] {
                        eligible.push(v);
                        simulated.insert(v, s);
                    }
                } else {
                    eligible.push(v);
                }
            } else if let Some(rule) = self.protocol.priority_rule(&self.config, v, &self.rule_order) {
                eligible.push(v);
                rules.insert(v, rule);
            }
        }
        if eligible.is_empty() {
            return Ok(None);
        }
        let mut activated = self.select(&eligible);
        activated.sort();

        let mut actions = Vec::with_capacity(activated.len());
        let mut writes = Vec::with_capacity(activated.len());
        for &v in &activated {
            if self.is_byzantine(v) {
                let state = match simulated.remove(&v) {
                    Some(s) => s,
                    None => {
                        let ctx = AdversaryContext {
                            protocol: self.protocol,
                            config: &self.config,
                            process: v,
                            step: self.steps_taken,
                            weakest: self.analysis.ladder().values.last().expect("ladder has a rung"),
                        };
                        let rng = self.byzantine_rngs.get_mut(&v).expect("stream per Byzantine");
                        self.scenario.strategy.act(&ctx, rng)?
                    }
                };
                self.protocol
                    .check_state(v, &state, true)
                    .map_err(|e| RuntimeError::Invariant(format!("adversary left its domain: {e}")))?;
                actions.push((v, Action::ByzantineWrite));
                writes.push((v, state));
            } else {
                let rule = rules[&v];
                actions.push((v, Action::Rule(rule)));
                writes.push((v, self.protocol.fire(&self.config, v, rule)));
            }
        }
        let mut changes = Vec::new();
        for (v, state) in writes {
            if state != self.config[v] {
                changes.push(Change { process: v, old: self.config[v].clone(), new: state.clone() });
                self.config.set(v, state);
            }
        }
        for v in self.scenario.topology.processes() {
            if eligible.contains(&v) && !activated.contains(&v) {
                self.waiting[v.0] += 1;
            } else {
                self.waiting[v.0] = 0;
            }
        }
        self.steps_taken += 1;
        Ok(Some(StepRecord {
            index: self.steps_taken,
            eligible,
            activated,
            actions,
            changes,
            digest: digest(&self.config),
        }))
    }

    /// Steps until `𝓛𝓒` is entered and then `K` more (or until nothing is
    /// eligible), within `max_steps` total.
    pub fn run(&mut self, max_steps: usize) -> Result<RunOutcome, RuntimeError> {
        if max_steps == 0 {
            return Err(RuntimeError::Validation("max_steps must be at least 1".into()));
        }
        let horizon = self.scenario.containment_horizon;
        let initial = self.config.clone();
        let first = annotate(&self.analysis, &self.config);
        let mut first_lc = first.legitimate().then_some(0);
        let mut snapshots = BTreeMap::from([(0, initial.clone())]);
        let mut annotations = vec![first];
        let mut steps = Vec::new();
        let mut silent = false;
        while steps.len() < max_steps {
            if first_lc.is_some_and(|f| steps.len() >= f + horizon) {
                break;
            }
            let Some(record) = self.step()? else {
                silent = true;
                break;
            };
            let note = annotate(&self.analysis, &self.config);
            if !note.same_predicates(annotations.last().unwrap()) {
                snapshots.insert(record.index, self.config.clone());
            }
            if first_lc.is_none() && note.legitimate() {
                first_lc = Some(record.index);
            }
            annotations.push(note);
            steps.push(record);
        }
        snapshots.insert(steps.len(), self.config.clone());
        let trace = Trace {
            initial_digest: digest(&initial),
            initial,
            steps,
            annotations,
            snapshots,
            final_config: self.config.clone(),
            silent,
        };
        let verdict = detect_containment(&trace, self.analysis.area(), horizon);
        Ok(RunOutcome { trace, verdict, max_steps })
    }

    /// [`Engine::run`] with the scenario's budget.
    pub fn run_default(&mut self) -> Result<RunOutcome, RuntimeError> {
        let budget = self.budget();
        self.run(budget)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::max_metric_tree_oracle;
    use crate::metric::{ShortestPath, Weight};
    use std::sync::Arc;

    fn path(n: usize) -> Topology {
        Topology::from_edges(n, 0, (0..n - 1).map(|i| (i, i + 1, Weight::Nat(1))))
    }

    fn scenario(t: Topology, daemon: DaemonKind, seed: u64) -> Scenario {
        let mut s = Scenario::new(t, Arc::new(ShortestPath::new()));
        s.daemon = daemon;
        s.seed = seed;
        s
    }

    #[test]
    fn central_activates_one_process() {
        let s = scenario(path(4), DaemonKind::Central, 3);
        let mut e = Engine::new(&s).unwrap();
        while let Some(rec) = e.step().unwrap() {
            assert_eq!(rec.activated.len(), 1);
            if e.steps_taken() > 200 {
                break;
            }
        }
    }

    #[test]
    fn synchronous_activates_every_eligible_process() {
        let s = scenario(path(4), DaemonKind::Synchronous, 5);
        let mut e = Engine::new(&s).unwrap();
        while let Some(rec) = e.step().unwrap() {
            assert_eq!(rec.activated, rec.eligible);
        }
    }

    #[test]
    fn unit_fairness_makes_adversarial_synchronous() {
        let mut s = scenario(path(5), DaemonKind::AdversarialFair, 8);
        s.fairness_bound = Some(1);
        let mut e = Engine::new(&s).unwrap();
        while let Some(rec) = e.step().unwrap() {
            assert_eq!(rec.activated, rec.eligible);
        }
    }

    #[test]
    fn fault_free_run_matches_tree_oracle() {
        for daemon in DaemonKind::ALL {
            for seed in 0..5 {
                let s = scenario(path(3), daemon, seed);
                let mut e = Engine::new(&s).unwrap();
                let out = e.run_default().unwrap();
                assert!(out.trace.silent);
                assert_eq!(out.verdict.mode, ContainmentMode::ExactLc);
                let oracle = max_metric_tree_oracle(&s.topology, &*s.metric).unwrap();
                let parents: Vec<_> = out.trace.final_config.states().iter().map(|st| st.prnt).collect();
                assert_eq!(parents, oracle);
                replay_check(&out.trace, e.protocol()).unwrap();
            }
        }
    }

    #[test]
    fn byzantine_path_freezes_the_correct_side() {
        let mut s = scenario(path(4), DaemonKind::Synchronous, 11);
        s.byzantine = BTreeSet::from([ProcessId(3)]);
        s.containment_horizon = 50;
        let mut e = Engine::new(&s).unwrap();
        let out = e.run_default().unwrap();
        let start = out.verdict.first_contained_step.expect("contained");
        for step in &out.trace.steps[start..] {
            for c in &step.changes {
                assert!(c.process == ProcessId(2) || c.process == ProcessId(3));
            }
        }
    }

    #[test]
    fn zero_budget_is_rejected() {
        let s = scenario(path(3), DaemonKind::Synchronous, 0);
        assert!(Engine::new(&s).unwrap().run(0).is_err());
        let mut bad = s.clone();
        bad.max_steps = Some(0);
        assert!(Engine::new(&bad).is_err());
        let mut root = s.clone();
        root.byzantine.insert(ProcessId(0));
        assert!(Engine::new(&root).is_err());
    }

    #[test]
    fn runs_are_reproducible() {
        let mut s = scenario(path(5), DaemonKind::RandomSubset, 42);
        s.byzantine = BTreeSet::from([ProcessId(4)]);
        s.strategy = AdversaryStrategy::Random;
        s.containment_horizon = 30;
        let a = Engine::new(&s).unwrap().run_default().unwrap().trace;
        let b = Engine::new(&s).unwrap().run_default().unwrap().trace;
        assert_eq!(a, b);
        let (mut x, mut y) = (Vec::new(), Vec::new());
        a.write_jsonl(&*s.metric, &mut x).unwrap();
        b.write_jsonl(&*s.metric, &mut y).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn closure_helpers() {
        assert_eq!(closure_of([false, true, true]), Ok(()));
        assert_eq!(closure_of([true, false]), Err(1));
        assert_eq!(closure_of([]), Ok(()));
    }

    #[test]
    fn containment_detection_on_fixtures() {
        let s = scenario(path(3), DaemonKind::Synchronous, 1);
        let e = Engine::new(&s).unwrap();
        let a = e.analysis();
        let cfg = e.config().clone();
        let mut note = annotate(a, &cfg);
        let last = note.lc.len() - 1;
        note.lc[last] = false;
        note.sb_spec = true;
        let flip = |i: usize| StepRecord {
            index: i,
            eligible: vec![ProcessId(1)],
            activated: vec![ProcessId(1)],
            actions: vec![(ProcessId(1), Action::Rule(RuleId::R3))],
            changes: vec![Change {
                process: ProcessId(1),
                old: cfg[ProcessId(1)].clone(),
                new: cfg[ProcessId(1)].clone(),
            }],
            digest: String::new(),
        };
        let mut trace = Trace {
            initial: cfg.clone(),
            initial_digest: String::new(),
            steps: (1..=10).map(flip).collect(),
            annotations: vec![note.clone(); 11],
            snapshots: BTreeMap::new(),
            final_config: cfg.clone(),
            silent: false,
        };
        assert_eq!(detect_containment(&trace, a.area(), 5).first_contained_step, None);
        let mut legit = note.clone();
        legit.lc[last] = true;
        trace.annotations[7] = legit;
        let v = detect_containment(&trace, a.area(), 5);
        assert_eq!((v.first_contained_step, v.mode), (Some(7), ContainmentMode::ExactLc));
    }
}
