//! Byzantine adversaries. A strategy rewrites a Byzantine process's
//! O-variables each time the daemon activates it, always within the declared
//! variable domains.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore};
use thiserror::Error;

use crate::metric::MetricValue;
use crate::protocol::{Configuration, ProcessState, Protocol, RuleId};
use crate::topology::ProcessId;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FaultError {
    #[error("unknown strategy {0:?} (expected lure, random, oscillate or simulate-correct)")]
    UnknownStrategy(String),
    #[error("strategy {strategy} needs {what}")]
    Capability { strategy: AdversaryStrategy, what: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum AdversaryStrategy {
    /// `(⊥, mr, 0)` on every activation.
    #[default]
    Lure,
    /// A uniform draw over legal states.
    Random,
    /// Lure on even steps, the weakest legal claim on odd steps.
    Oscillate,
    /// Runs the process's own enabled rule, as a correct process would.
    SimulateCorrect,
}

impl AdversaryStrategy {
    pub const ALL: [AdversaryStrategy; 4] = [
        AdversaryStrategy::Lure,
        AdversaryStrategy::Random,
        AdversaryStrategy::Oscillate,
        AdversaryStrategy::SimulateCorrect,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AdversaryStrategy::Lure => "lure",
            AdversaryStrategy::Random => "random",
            AdversaryStrategy::Oscillate => "oscillate",
            AdversaryStrategy::SimulateCorrect => "simulate-correct",
        }
    }
}

impl fmt::Display for AdversaryStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AdversaryStrategy {
    type Err = FaultError;

    fn from_str(s: &str) -> Result<Self, FaultError> {
        AdversaryStrategy::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| FaultError::UnknownStrategy(s.to_string()))
    }
}

/// What a strategy may look at when it is activated.
#[derive(Clone, Copy)]
pub struct AdversaryContext<'a> {
    pub protocol: Protocol<'a>,
    pub config: &'a Configuration,
    pub process: ProcessId,
    pub step: usize,
    /// A `≺`-minimal realized metric value (last ladder rung).
    pub weakest: &'a MetricValue,
}

impl AdversaryStrategy {
    /// The state written by the Byzantine process `ctx.process`.
    pub fn act(self, ctx: &AdversaryContext<'_>, rng: &mut dyn RngCore) -> Result<ProcessState, FaultError> {
        match self {
            AdversaryStrategy::Lure => Ok(lure(ctx)),
            AdversaryStrategy::Random => random_state(ctx, rng),
            AdversaryStrategy::Oscillate => Ok(oscillate(ctx)),
            AdversaryStrategy::SimulateCorrect => Ok(simulate_correct(ctx)),
        }
    }
}

pub fn lure(ctx: &AdversaryContext<'_>) -> ProcessState {
    ProcessState::rooted(ctx.protocol.metric().root_value())
}

pub fn oscillate(ctx: &AdversaryContext<'_>) -> ProcessState {
    if ctx.step.is_multiple_of(2) {
        lure(ctx)
    } else {
        ProcessState::new(None, ctx.weakest.clone(), ctx.protocol.topology().max_path_len())
    }
}

/// Uniform over `(N_b ∪ {⊥}) × {m ⪯ mr} × {0..D}`, or over a sampler's
/// support when `M` is not enumerable.
pub fn random_state(ctx: &AdversaryContext<'_>, rng: &mut dyn RngCore) -> Result<ProcessState, FaultError> {
    let topology = ctx.protocol.topology();
    let ms = ctx.protocol.metric();
    let mut parents: Vec<Option<ProcessId>> = vec![None];
    parents.extend(topology.nbrs(ctx.process).iter().map(|&u| Some(u)));
    let prnt = *parents.choose(rng).expect("nonempty");
    let level = sample_level(ms, rng).ok_or(FaultError::Capability {
        strategy: AdversaryStrategy::Random,
        what: "an enumerable metric domain or a sampler".into(),
    })?;
    let dist = rng.gen_range(0..=topology.max_path_len());
    Ok(ProcessState::new(prnt, level, dist))
}

/// A level drawn uniformly from `{m ⪯ mr}` (enumeration first, sampler otherwise).
pub fn sample_level(ms: &dyn crate::metric::MetricSpace, rng: &mut dyn RngCore) -> Option<MetricValue> {
    let mr = ms.root_value();
    if let Some(values) = ms.values() {
        let legal: Vec<_> = values.into_iter().filter(|m| ms.precedes_or_eq(m, &mr)).collect();
        return legal.choose(rng).cloned();
    }
    ms.sample_value(rng)
}

/// The state a correct process would move to. A `⊥` parent is outside the
/// correct domain, so it is first replaced by the first neighbor in order
/// (what `choose` returns from `⊥`).
pub fn simulate_correct(ctx: &AdversaryContext<'_>) -> ProcessState {
    let b = ctx.process;
    let proto = ctx.protocol;
    let mut current = ctx.config[b].clone();
    let projected;
    let cfg = if current.prnt.is_none() && !proto.topology().nbrs(b).is_empty() {
        current.prnt = Some(proto.topology().nbrs(b)[0]);
        let mut c = ctx.config.clone();
        c.set(b, current.clone());
        projected = c;
        &projected
    } else {
        ctx.config
    };
    match proto.priority_rule(cfg, b, &RuleId::PRIORITY) {
        Some(rule) => proto.fire(cfg, b, rule),
        None => current,
    }
}
