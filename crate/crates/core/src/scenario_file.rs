//! The JSON scenario format.
//!
//! Nodes are referenced either by index or, when `nodes` is a list of names,
//! by name. Unknown members are rejected.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value as Json};

use crate::faults::AdversaryStrategy;
use crate::metric::{metric_from_json, MetricSpace};
use crate::protocol::{Configuration, ProcessState};
use crate::runtime::{DaemonKind, InitialConfig, Scenario, DEFAULT_HORIZON};
use crate::topology::{ProcessId, Topology};

/// A validation failure, located by member path (e.g. `edges[2][1]`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScenarioError {
    pub path: String,
    pub message: String,
}

impl ScenarioError {
    fn at(path: impl Into<String>, message: impl Into<String>) -> Self {
        ScenarioError { path: path.into(), message: message.into() }
    }
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

impl std::error::Error for ScenarioError {}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Nodes {
    Count(usize),
    Named(Vec<String>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DaemonSpec {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fairness_bound: Option<usize>,
}

impl Default for DaemonSpec {
    fn default() -> Self {
        DaemonSpec { kind: DaemonKind::default().name().into(), fairness_bound: None }
    }
}

fn default_strategy() -> String {
    AdversaryStrategy::default().name().into()
}

fn default_horizon() -> usize {
    DEFAULT_HORIZON
}

fn default_init() -> Json {
    json!("random")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub nodes: Nodes,
    /// `[u, v, weight]` triples.
    pub edges: Vec<(Json, Json, Json)>,
    pub root: Json,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub neighbor_order: Option<BTreeMap<String, Vec<Json>>>,
    pub metric: Json,
    #[serde(default)]
    pub byzantine: Vec<Json>,
    #[serde(default = "default_strategy")]
    pub strategy: String,
    #[serde(default)]
    pub daemon: DaemonSpec,
    #[serde(default)]
    pub seed: u64,
    #[serde(rename = "D", default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<usize>,
    #[serde(default = "default_horizon")]
    pub containment_horizon: usize,
    /// `"random"` or an object mapping each node to `{prnt, level, dist}`.
    #[serde(default = "default_init")]
    pub init: Json,
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        serde_json::from_str(text).map_err(|e| ScenarioError::at("", e.to_string()))
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario files serialize") + "\n"
    }

    fn names(&self) -> Vec<String> {
        match &self.nodes {
            Nodes::Count(n) => (0..*n).map(|i| i.to_string()).collect(),
            Nodes::Named(names) => names.clone(),
        }
    }

    fn resolve(&self, names: &[String], raw: &Json, path: &str) -> Result<ProcessId, ScenarioError> {
        let found = match raw {
            Json::Number(n) => n.as_u64().map(|i| i as usize).filter(|&i| i < names.len()),
            Json::String(s) => names.iter().position(|x| x == s),
            _ => None,
        };
        found.map(ProcessId).ok_or_else(|| ScenarioError::at(path, format!("unknown node {raw}")))
    }

    fn resolve_key(&self, names: &[String], key: &str, path: &str) -> Result<ProcessId, ScenarioError> {
        if let Some(i) = names.iter().position(|x| x == key) {
            return Ok(ProcessId(i));
        }
        key.parse::<usize>()
            .ok()
            .filter(|&i| i < names.len())
            .map(ProcessId)
            .ok_or_else(|| ScenarioError::at(path, format!("unknown node {key:?}")))
    }

    /// Builds and validates the scenario.
    pub fn to_scenario(&self) -> Result<Scenario, ScenarioError> {
        let names = self.names();
        if let Nodes::Named(list) = &self.nodes {
            let unique: BTreeSet<_> = list.iter().collect();
            if unique.len() != list.len() {
                return Err(ScenarioError::at("nodes", "duplicate node name"));
            }
        }
        let metric = metric_from_json(&self.metric).map_err(|e| ScenarioError::at("metric", e.to_string()))?;
        let mut edges = Vec::with_capacity(self.edges.len());
        for (i, (u, v, w)) in self.edges.iter().enumerate() {
            let u = self.resolve(&names, u, &format!("edges[{i}][0]"))?;
            let v = self.resolve(&names, v, &format!("edges[{i}][1]"))?;
            let w = metric.parse_weight(w).map_err(|e| ScenarioError::at(format!("edges[{i}][2]"), e.to_string()))?;
            edges.push((u, v, w));
        }
        let root = self.resolve(&names, &self.root, "root")?;
        let mut topology = Topology::new(names.len(), root, edges);
        if let Nodes::Named(list) = &self.nodes {
            topology = topology.with_labels(list.clone());
        }
        if let Some(orders) = &self.neighbor_order {
            for (key, order) in orders {
                let path = format!("neighbor_order.{key}");
                let v = self.resolve_key(&names, key, &path)?;
                let order = order
                    .iter()
                    .enumerate()
                    .map(|(j, raw)| self.resolve(&names, raw, &format!("{path}[{j}]")))
                    .collect::<Result<Vec<_>, _>>()?;
                topology = topology.with_neighbor_order(v, order);
            }
        }
        if let Some(d) = self.d {
            topology = topology.with_max_path_len(d);
        }
        let violations = topology.validate();
        if let Some(first) = violations.first() {
            return Err(ScenarioError::at("edges", first.to_string()));
        }
        if let Some(first) = topology.validate_weights(&*metric).first() {
            return Err(ScenarioError::at("edges", first.to_string()));
        }

        let mut byzantine = BTreeSet::new();
        for (i, raw) in self.byzantine.iter().enumerate() {
            let path = format!("byzantine[{i}]");
            let b = self.resolve(&names, raw, &path)?;
            if b == root {
                return Err(ScenarioError::at(path, "the root cannot be Byzantine"));
            }
            byzantine.insert(b);
        }
        let strategy: AdversaryStrategy =
            self.strategy.parse().map_err(|e: crate::faults::FaultError| ScenarioError::at("strategy", e.to_string()))?;
        let daemon: DaemonKind = self
            .daemon
            .kind
            .parse()
            .map_err(|_| ScenarioError::at("daemon.kind", format!("unknown daemon {:?}", self.daemon.kind)))?;
        if self.daemon.fairness_bound == Some(0) {
            return Err(ScenarioError::at("daemon.fairness_bound", "must be at least 1"));
        }
        if self.max_steps == Some(0) {
            return Err(ScenarioError::at("max_steps", "must be at least 1"));
        }
        let init = match &self.init {
            Json::String(s) if s == "random" => InitialConfig::Random,
            Json::Object(map) => {
                let mut states: Vec<Option<ProcessState>> = vec![None; names.len()];
                for (key, raw) in map {
                    let path = format!("init.{key}");
                    let v = self.resolve_key(&names, key, &path)?;
                    states[v.0] = Some(parse_state(self, &names, &*metric, raw, &path)?);
                }
                let states = states
                    .into_iter()
                    .enumerate()
                    .map(|(i, s)| s.ok_or_else(|| ScenarioError::at("init", format!("missing state for {}", names[i]))))
                    .collect::<Result<Vec<_>, _>>()?;
                InitialConfig::Explicit(Configuration::new(states))
            }
            other => return Err(ScenarioError::at("init", format!("expected \"random\" or an object, got {other}"))),
        };

        let scenario = Scenario {
            topology,
            metric,
            byzantine,
            strategy,
            daemon,
            fairness_bound: self.daemon.fairness_bound,
            seed: self.seed,
            max_steps: self.max_steps,
            containment_horizon: self.containment_horizon,
            init,
        };
        scenario.validate().map_err(|e| ScenarioError::at("", e.to_string()))?;
        Ok(scenario)
    }

    /// The file form of a scenario. Node names come from the topology labels
    /// when present.
    pub fn from_scenario(s: &Scenario) -> Self {
        let t = &s.topology;
        let ms = &*s.metric;
        let labelled = t.labels().is_some();
        let node = |v: ProcessId| if labelled { json!(t.name(v)) } else { json!(v.0) };
        let default_order = Topology::new(t.len(), t.root(), t.edges().to_vec());
        let neighbor_order: BTreeMap<String, Vec<Json>> = t
            .processes()
            .filter(|&v| default_order.neighbors(v).ok() != t.neighbors(v).ok())
            .map(|v| (t.name(v), t.neighbors(v).unwrap().iter().map(|&u| node(u)).collect()))
            .collect();
        let init = match &s.init {
            InitialConfig::Random => json!("random"),
            InitialConfig::Explicit(cfg) => {
                let map: serde_json::Map<String, Json> = cfg
                    .iter()
                    .map(|(v, st)| {
                        (
                            t.name(v),
                            json!({
                                "prnt": st.prnt.map(node),
                                "level": ms.value_to_json(&st.level),
                                "dist": st.dist,
                            }),
                        )
                    })
                    .collect();
                Json::Object(map)
            }
        };
        ScenarioFile {
            nodes: match t.labels() {
                Some(l) => Nodes::Named(l.to_vec()),
                None => Nodes::Count(t.len()),
            },
            edges: t.edges().iter().map(|(u, v, w)| (node(*u), node(*v), ms.weight_to_json(w))).collect(),
            root: node(t.root()),
            neighbor_order: (!neighbor_order.is_empty()).then_some(neighbor_order),
            metric: ms.to_json(),
            byzantine: s.byzantine.iter().map(|&b| node(b)).collect(),
            strategy: s.strategy.name().into(),
            daemon: DaemonSpec { kind: s.daemon.name().into(), fairness_bound: s.fairness_bound },
            seed: s.seed,
            d: Some(t.max_path_len()),
            max_steps: s.max_steps,
            containment_horizon: s.containment_horizon,
            init,
        }
    }
}

fn parse_state(
    file: &ScenarioFile,
    names: &[String],
    ms: &dyn MetricSpace,
    raw: &Json,
    path: &str,
) -> Result<ProcessState, ScenarioError> {
    let obj = raw.as_object().ok_or_else(|| ScenarioError::at(path, "expected {prnt, level, dist}"))?;
    if let Some(extra) = obj.keys().find(|k| !["prnt", "level", "dist"].contains(&k.as_str())) {
        return Err(ScenarioError::at(format!("{path}.{extra}"), "unknown member"));
    }
    let prnt = match obj.get("prnt") {
        None | Some(Json::Null) => None,
        Some(p) => Some(file.resolve(names, p, &format!("{path}.prnt"))?),
    };
    let level_raw = obj.get("level").ok_or_else(|| ScenarioError::at(format!("{path}.level"), "missing"))?;
    let level = ms.parse_value(level_raw).map_err(|e| ScenarioError::at(format!("{path}.level"), e.to_string()))?;
    let dist = obj
        .get("dist")
        .and_then(Json::as_u64)
        .ok_or_else(|| ScenarioError::at(format!("{path}.dist"), "expected a natural number"))? as usize;
    Ok(ProcessState::new(prnt, level, dist))
}

#[cfg(test)]
mod tests {
    use super::*;

    const PATH: &str = r#"{
        "nodes": ["r", "u", "v", "b"],
        "edges": [["r", "u", 1], ["u", "v", 1], ["v", "b", 1]],
        "root": "r",
        "metric": "sp",
        "byzantine": ["b"],
        "daemon": {"kind": "central", "fairness_bound": 16},
        "seed": 7
    }"#;

    #[test]
    fn parses_and_round_trips() {
        let file = ScenarioFile::parse(PATH).unwrap();
        let s = file.to_scenario().unwrap();
        assert_eq!(s.topology.len(), 4);
        assert_eq!(s.byzantine, BTreeSet::from([ProcessId(3)]));
        assert_eq!(s.daemon, DaemonKind::Central);
        let again = ScenarioFile::from_scenario(&s);
        let text = again.to_json_string();
        let back = ScenarioFile::parse(&text).unwrap();
        assert_eq!(back, again);
        assert_eq!(back.to_scenario().unwrap().topology, s.topology);
    }

    #[test]
    fn rejects_unknown_members() {
        let text = PATH.replace("\"seed\": 7", "\"seed\": 7, \"sede\": 1");
        assert!(ScenarioFile::parse(&text).is_err());
    }

    #[test]
    fn errors_carry_member_paths() {
        let bad_edge = PATH.replace("[\"v\", \"b\", 1]", "[\"v\", \"x\", 1]");
        let err = ScenarioFile::parse(&bad_edge).unwrap().to_scenario().unwrap_err();
        assert_eq!(err.path, "edges[2][1]");
        let root_byz = PATH.replace("[\"b\"]", "[\"r\"]");
        let err = ScenarioFile::parse(&root_byz).unwrap().to_scenario().unwrap_err();
        assert_eq!(err.path, "byzantine[0]");
        let bad_weight = PATH.replace("[\"r\", \"u\", 1]", "[\"r\", \"u\", \"heavy\"]");
        let err = ScenarioFile::parse(&bad_weight).unwrap().to_scenario().unwrap_err();
        assert_eq!(err.path, "edges[0][2]");
    }

    #[test]
    fn explicit_init() {
        let text = PATH.replace(
            "\"seed\": 7",
            r#""seed": 7, "init": {
                "r": {"prnt": null, "level": 0, "dist": 0},
                "u": {"prnt": "r", "level": 1, "dist": 1},
                "v": {"prnt": "u", "level": 2, "dist": 2},
                "b": {"prnt": null, "level": 0, "dist": 0}
            }"#,
        );
        let s = ScenarioFile::parse(&text).unwrap().to_scenario().unwrap();
        let InitialConfig::Explicit(cfg) = &s.init else { panic!("explicit init expected") };
        assert_eq!(cfg[ProcessId(2)].prnt, Some(ProcessId(1)));
        let missing = text.replace(r#""b": {"prnt": null, "level": 0, "dist": 0}"#, "").replace("\"dist\": 2},", "\"dist\": 2}");
        assert!(ScenarioFile::parse(&missing).unwrap().to_scenario().is_err());
    }
}
