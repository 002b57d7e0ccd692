//! Run reports: what `ssmax run` prints, in text or JSON.

use std::fmt::Write;

use serde::{Deserialize, Serialize};

use ssmax_core::analysis::Analysis;
use ssmax_core::runtime::{closure_violations, ladder_progress, longest_wait, ClosurePredicate, RunOutcome, Scenario};
use ssmax_core::topology::ProcessId;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LadderRow {
    pub value: String,
    pub lc: Option<usize>,
    pub dist_saturated: Option<usize>,
    pub level_decayed: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateRow {
    pub node: String,
    pub role: String,
    pub prnt: Option<String>,
    pub level: String,
    pub dist: usize,
}

/// Everything except wall time, which would break byte-stable output; the
/// binary prints that on stderr.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunReport {
    pub seed: u64,
    pub daemon: String,
    pub strategy: String,
    pub nodes: usize,
    pub byzantine: Vec<String>,
    /// `exact-LC`, `horizon` or `not-contained`.
    pub verdict: String,
    pub first_contained_step: Option<usize>,
    pub steps: usize,
    pub max_steps: usize,
    pub silent: bool,
    pub final_digest: String,
    pub containment_area: Vec<String>,
    pub ladder: Vec<LadderRow>,
    pub closure_violations: Vec<String>,
    /// Longest stretch any process stayed eligible without being activated.
    pub longest_wait: usize,
    pub final_states: Vec<StateRow>,
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_BUDGET: i32 = 3;
pub const EXIT_INVARIANT: i32 = 4;

fn role(analysis: &Analysis<'_>, v: ProcessId) -> &'static str {
    if v == analysis.topology().root() {
        "root"
    } else if analysis.is_byzantine(v) {
        "byzantine"
    } else if analysis.area().contains(v) {
        "S_B"
    } else {
        "correct"
    }
}

impl RunReport {
    pub fn build(scenario: &Scenario, analysis: &Analysis<'_>, outcome: &RunOutcome) -> Self {
        let t = &scenario.topology;
        let trace = &outcome.trace;
        let name = |v: ProcessId| t.name(v);
        let ladder = ladder_progress(trace)
            .into_iter()
            .zip(&analysis.ladder().values)
            .map(|(p, m)| LadderRow {
                value: m.to_string(),
                lc: p.lc,
                dist_saturated: p.dist_saturated,
                level_decayed: p.level_decayed,
            })
            .collect();
        let closure = closure_violations(trace)
            .into_iter()
            .map(|(p, at)| match p {
                ClosurePredicate::Im(i) => format!("IM[{i}] broken at step {at}"),
                ClosurePredicate::Lc(i) => format!("LC[{i}] broken at step {at}"),
            })
            .collect();
        let final_states = t
            .processes()
            .map(|v| {
                let s = &trace.final_config[v];
                StateRow {
                    node: name(v),
                    role: role(analysis, v).into(),
                    prnt: s.prnt.map(name),
                    level: s.level.to_string(),
                    dist: s.dist,
                }
            })
            .collect();
        let verdict = match outcome.verdict.first_contained_step {
            Some(_) => outcome.verdict.mode.to_string(),
            None => "not-contained".into(),
        };
        RunReport {
            seed: scenario.seed,
            daemon: scenario.daemon.name().into(),
            strategy: scenario.strategy.name().into(),
            nodes: t.len(),
            byzantine: scenario.byzantine.iter().map(|&b| name(b)).collect(),
            verdict,
            first_contained_step: outcome.verdict.first_contained_step,
            steps: trace.steps.len(),
            max_steps: outcome.max_steps,
            silent: trace.silent,
            final_digest: trace.steps.last().map_or(trace.initial_digest.clone(), |s| s.digest.clone()),
            containment_area: analysis.area().members.iter().map(|&v| name(v)).collect(),
            ladder,
            closure_violations: closure,
            longest_wait: longest_wait(trace).map_or(0, |(_, w)| w),
            final_states,
        }
    }

    pub fn exit_code(&self) -> i32 {
        if !self.closure_violations.is_empty() {
            EXIT_INVARIANT
        } else if self.first_contained_step.is_none() {
            EXIT_BUDGET
        } else {
            EXIT_OK
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize") + "\n"
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let opt = |x: Option<usize>| x.map_or("-".to_string(), |i| i.to_string());
        let set = |xs: &[String]| format!("{{{}}}", xs.join(", "));
        writeln!(out, "seed: {}", self.seed).unwrap();
        writeln!(out, "daemon: {}, strategy: {}", self.daemon, self.strategy).unwrap();
        writeln!(out, "nodes: {}, byzantine: {}", self.nodes, set(&self.byzantine)).unwrap();
        writeln!(out, "verdict: {} (first contained step {})", self.verdict, opt(self.first_contained_step)).unwrap();
        let ending = if self.silent { ", silent" } else { "" };
        writeln!(out, "steps: {} of {}{ending}", self.steps, self.max_steps).unwrap();
        writeln!(out, "final digest: {}", self.final_digest).unwrap();
        writeln!(out, "S_B: {}", set(&self.containment_area)).unwrap();
        writeln!(out, "ladder:").unwrap();
        writeln!(out, "  {:>4}  {:>12}  {:>6}  {:>14}  {:>13}", "rung", "value", "LC", "dist-saturated", "level-decayed")
            .unwrap();
        for (i, row) in self.ladder.iter().enumerate() {
            writeln!(
                out,
                "  {:>4}  {:>12}  {:>6}  {:>14}  {:>13}",
                i,
                row.value,
                opt(row.lc),
                opt(row.dist_saturated),
                opt(row.level_decayed)
            )
            .unwrap();
        }
        if self.closure_violations.is_empty() {
            writeln!(out, "closure violations: none").unwrap();
        } else {
            writeln!(out, "closure violations: {}", self.closure_violations.join("; ")).unwrap();
        }
        writeln!(out, "longest wait: {}", self.longest_wait).unwrap();
        writeln!(out, "final states:").unwrap();
        for s in &self.final_states {
            let prnt = s.prnt.as_deref().unwrap_or("⊥");
            writeln!(out, "  {:<6} {:<9} prnt={prnt} level={} dist={}", s.node, s.role, s.level, s.dist).unwrap();
        }
        out
    }
}
