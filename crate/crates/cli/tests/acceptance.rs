//! End-to-end acceptance checks, one line per criterion.
//!
//! Runs without the libtest harness so the verdict lines always reach the
//! output; exits nonzero if any criterion fails.

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ssmax_cli::{cmd_run, simulate, RunFlags};
use ssmax_core::analysis::{compute_mu, compute_mu_bruteforce, Analysis};
use ssmax_core::faults::AdversaryStrategy;
use ssmax_core::metric::synthetic::{absolute_difference, saturating_difference};
use ssmax_core::metric::{
    check_bounded, check_monotonic, Flow, MetricSpace, Reliability, SharedMetric, ShortestPath, Weight, Witness,
};
use ssmax_core::runtime::{closure_violations, ladder_progress, ContainmentMode, DaemonKind, Scenario, Trace};
use ssmax_core::scenario_file::ScenarioFile;
use ssmax_core::scenarios::{build_case, CaseId};
use ssmax_core::topology::{random_connected, ProcessId, Topology};

const SAMPLES: usize = 10_000;
const MU_GRAPHS: usize = 100;
const MU_BUDGET: Duration = Duration::from_secs(60);
const RUN_GRAPHS: usize = 20;
const FAULT_FREE_INITS: u64 = 50;
const BYZANTINE_SEEDS: u64 = 2;
const FROZEN_STEPS: usize = 500;
const MAX_N: usize = 8;

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(failures: &[String], summary: String) -> Verdict {
    let detail = match failures.first() {
        None => summary,
        Some(first) => format!("{summary}; {} failures, first: {first}", failures.len()),
    };
    Verdict { passed: failures.is_empty(), detail }
}

fn metrics() -> Vec<SharedMetric> {
    vec![Arc::new(ShortestPath::new()), Arc::new(Flow::new(10)), Arc::new(Reliability::new())]
}

/// Small weights keep shortest-path values readable; reliability weights
/// stay on the quarter grid so exact products remain short.
fn sample_weight(ms: &dyn MetricSpace, rng: &mut ChaCha8Rng) -> Weight {
    match ms.name().as_str() {
        "sp" => Weight::Nat(rng.gen_range(0..=5)),
        "reliability" => Weight::real(rng.gen_range(1..=4), 4),
        _ => Weight::Nat(rng.gen_range(0..=10)),
    }
}

fn random_graph(ms: &dyn MetricSpace, n: usize, rng: &mut ChaCha8Rng) -> Topology {
    random_connected(n, 0.3, rng, |r| sample_weight(ms, r))
}

fn random_byzantine(t: &Topology, size: usize, rng: &mut ChaCha8Rng) -> BTreeSet<ProcessId> {
    let mut others: Vec<ProcessId> = t.processes().filter(|&v| v != t.root()).collect();
    others.shuffle(rng);
    others.into_iter().take(size).collect()
}

/// Runs `jobs` on every available core, keeping results in job order.
fn parallel<J: Sync, R: Send>(jobs: &[J], work: impl Fn(&J) -> R + Sync) -> Vec<R> {
    let workers = thread::available_parallelism().map_or(1, |n| n.get()).min(jobs.len().max(1));
    let chunk = jobs.len().div_ceil(workers).max(1);
    thread::scope(|s| {
        let handles: Vec<_> = jobs.chunks(chunk).map(|c| s.spawn(|| c.iter().map(&work).collect::<Vec<_>>())).collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
    })
}

fn criterion_1() -> Verdict {
    let mut failures = Vec::new();
    let mut checked = Vec::new();
    let mut maximizable: Vec<SharedMetric> = vec![Arc::new(ShortestPath::new()), Arc::new(Reliability::new())];
    maximizable.extend((1..=10).map(|mr| Arc::new(Flow::new(mr)) as SharedMetric));
    for ms in &maximizable {
        for (what, r) in [
            ("bounded", check_bounded(&**ms, SAMPLES, 1)),
            ("monotonic", check_monotonic(&**ms, SAMPLES, 1)),
        ] {
            match r {
                Ok(rep) if rep.passed() => {}
                Ok(rep) => failures.push(format!("{} {what}: {rep}", ms.name())),
                Err(e) => failures.push(format!("{} {what}: {e}", ms.name())),
            }
        }
        checked.push(ms.name());
    }
    match check_bounded(&saturating_difference(10), SAMPLES, 1) {
        Ok(rep) if matches!(rep.witness, Some(Witness::Bounded { .. })) => {}
        other => failures.push(format!("unbounded fixture not caught: {other:?}")),
    }
    match check_monotonic(&absolute_difference(10), SAMPLES, 1) {
        Ok(rep) if matches!(rep.witness, Some(Witness::Monotonic { .. })) => {}
        other => failures.push(format!("non-monotonic fixture not caught: {other:?}")),
    }
    verdict(&failures, format!("{} metrics pass, 2 fixtures fail with witnesses", checked.len()))
}

struct MuCase {
    topology: Topology,
    metric: SharedMetric,
}

fn mu_corpus() -> Vec<MuCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut out = Vec::new();
    for metric in metrics() {
        for _ in 0..MU_GRAPHS {
            let n = rng.gen_range(2..=MAX_N);
            let topology = random_graph(&*metric, n, &mut rng);
            out.push(MuCase { topology, metric: metric.clone() });
        }
    }
    out
}

fn criterion_2(corpus: &[MuCase]) -> Verdict {
    let started = Instant::now();
    let failures: Vec<String> = parallel(corpus, |c| {
        let t = &c.topology;
        let mut bad = Vec::new();
        for x in t.processes() {
            let fast = compute_mu(t, &*c.metric, x);
            let slow = compute_mu_bruteforce(t, &*c.metric, x);
            if fast.as_ref().ok() != slow.as_ref().ok() || fast.is_err() {
                bad.push(format!("{} n={} root {x}: {fast:?} vs {slow:?}", c.metric.name(), t.len()));
            }
        }
        bad
    })
    .into_iter()
    .flatten()
    .collect();
    let elapsed = started.elapsed();
    let mut failures = failures;
    if elapsed > MU_BUDGET {
        failures.push(format!("took {elapsed:?}, budget {MU_BUDGET:?}"));
    }
    verdict(&failures, format!("{} graphs, every node as root, {:.1}s", corpus.len(), elapsed.as_secs_f64()))
}

fn criterion_3(corpus: &[MuCase]) -> Verdict {
    let jobs: Vec<(usize, usize)> = (0..corpus.len()).flat_map(|i| (0..=2).map(move |b| (i, b))).collect();
    let results = parallel(&jobs, |&(i, size)| {
        let c = &corpus[i];
        let mut rng = ChaCha8Rng::seed_from_u64(3_000 + i as u64 * 3 + size as u64);
        let byz = random_byzantine(&c.topology, size.min(c.topology.len() - 1), &mut rng);
        match Analysis::new(&c.topology, &*c.metric, &byz) {
            Ok(a) => a.neighborhood_bound_violations().iter().map(|(u, v)| format!("graph {i} B={byz:?}: {u}-{v}")).collect(),
            Err(e) => vec![format!("graph {i}: {e}")],
        }
    });
    let failures: Vec<String> = results.into_iter().flatten().collect();
    verdict(&failures, format!("{} (graph, metric, B) triples", jobs.len()))
}

fn run_corpus() -> Vec<(Topology, SharedMetric)> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let metrics = metrics();
    (0..RUN_GRAPHS)
        .map(|i| {
            let ms = metrics[i % metrics.len()].clone();
            let n = rng.gen_range(4..=MAX_N);
            (random_graph(&*ms, n, &mut rng), ms)
        })
        .collect()
}

/// A finished run plus what the criteria need to inspect it.
struct Observed {
    label: String,
    trace: Trace,
    problem: Option<String>,
    area_size: usize,
}

fn criterion_4(corpus: &[(Topology, SharedMetric)]) -> (Verdict, Vec<Observed>) {
    let daemons = [DaemonKind::Central, DaemonKind::Synchronous, DaemonKind::AdversarialFair];
    let jobs: Vec<(usize, DaemonKind, u64)> = (0..corpus.len())
        .flat_map(|g| daemons.iter().flat_map(move |&d| (0..FAULT_FREE_INITS).map(move |s| (g, d, s))))
        .collect();
    let observed = parallel(&jobs, |&(g, daemon, seed)| {
        let (t, ms) = &corpus[g];
        let mut s = Scenario::new(t.clone(), ms.clone());
        s.daemon = daemon;
        s.seed = seed;
        let label = format!("graph {g} {} {daemon} seed {seed}", ms.name());
        let (outcome, _) = match simulate(&s) {
            Ok(r) => r,
            Err(e) => return Observed { label, trace: empty_trace(), problem: Some(e.to_string()), area_size: 0 },
        };
        let trace = outcome.trace;
        let problem = fault_free_problem(t, &**ms, &trace);
        Observed { label, trace, problem, area_size: 0 }
    });
    let failures: Vec<String> =
        observed.iter().filter_map(|o| o.problem.as_ref().map(|p| format!("{}: {p}", o.label))).collect();
    (verdict(&failures, format!("{} runs reached the silent maximum metric tree", observed.len())), observed)
}

fn empty_trace() -> Trace {
    Trace {
        initial: ssmax_core::protocol::Configuration::new(Vec::new()),
        initial_digest: String::new(),
        steps: Vec::new(),
        annotations: Vec::new(),
        snapshots: Default::default(),
        final_config: ssmax_core::protocol::Configuration::new(Vec::new()),
        silent: false,
    }
}

/// Silent, legitimate, and every level equal to the optimum `μ(v, r)` over a
/// valid parent edge.
fn fault_free_problem(t: &Topology, ms: &dyn MetricSpace, trace: &Trace) -> Option<String> {
    if !trace.silent {
        return Some("not silent within budget".into());
    }
    let last = trace.annotations.last().expect("annotated");
    if last.enabled != 0 || !last.legitimate() {
        return Some(format!("final enabled={} legitimate={}", last.enabled, last.legitimate()));
    }
    let mu = compute_mu(t, ms, t.root()).ok()?;
    let cfg = &trace.final_config;
    for v in t.processes() {
        let s = &cfg[v];
        if s.level != mu[v.0] {
            return Some(format!("{v}: level {} but optimum {}", s.level, mu[v.0]));
        }
        if v == t.root() {
            continue;
        }
        let Some(p) = s.prnt else { return Some(format!("{v}: no parent")) };
        let w = t.weight(v, p).ok()?;
        if ms.compose(&cfg[p].level, w) != s.level || s.dist != cfg[p].dist + 1 {
            return Some(format!("{v}: parent {p} does not explain its state"));
        }
    }
    None
}

fn criterion_5(corpus: &[(Topology, SharedMetric)]) -> (Verdict, Vec<Observed>) {
    let strategies = [AdversaryStrategy::Lure, AdversaryStrategy::Random, AdversaryStrategy::Oscillate];
    let jobs: Vec<(usize, AdversaryStrategy, DaemonKind, u64)> = (0..corpus.len())
        .flat_map(|g| {
            strategies.iter().flat_map(move |&st| {
                DaemonKind::ALL.iter().flat_map(move |&d| (0..BYZANTINE_SEEDS).map(move |s| (g, st, d, s)))
            })
        })
        .collect();
    let observed = parallel(&jobs, |&(g, strategy, daemon, seed)| {
        let (t, ms) = &corpus[g];
        let mut rng = ChaCha8Rng::seed_from_u64(5_000 + seed * 1_000 + g as u64);
        let size = rng.gen_range(1..t.len());
        let mut s = Scenario::new(t.clone(), ms.clone());
        s.byzantine = random_byzantine(t, size, &mut rng);
        s.strategy = strategy;
        s.daemon = daemon;
        s.seed = seed;
        s.containment_horizon = FROZEN_STEPS;
        let label = format!("graph {g} {} {strategy} {daemon} B={:?} seed {seed}", ms.name(), s.byzantine);
        let outcome = match simulate(&s) {
            Ok((o, _)) => o,
            Err(e) => return Observed { label, trace: empty_trace(), problem: Some(e.to_string()), area_size: 0 },
        };
        let area_size = Analysis::new(t, &**ms, &s.byzantine).map_or(0, |a| a.area().members.len());
        let problem = match (outcome.verdict.mode, outcome.verdict.first_contained_step) {
            (ContainmentMode::ExactLc, Some(f)) => frozen_problem(&s, &outcome.trace, f),
            (mode, first) => Some(format!("verdict {mode} {first:?} after {} steps", outcome.trace.steps.len())),
        };
        Observed { label, trace: outcome.trace, problem, area_size }
    });
    let failures: Vec<String> =
        observed.iter().filter_map(|o| o.problem.as_ref().map(|p| format!("{}: {p}", o.label))).collect();
    let nonempty = observed.iter().filter(|o| o.area_size > 0).count();
    let summary = format!(
        "{} Byzantine runs contained exactly and stayed frozen ({nonempty} with nonempty S_B)",
        observed.len()
    );
    (verdict(&failures, summary), observed)
}

/// After `first`, correct processes outside `S_B` keep their predicate and
/// their variables for at least `FROZEN_STEPS` recorded steps.
fn frozen_problem(s: &Scenario, trace: &Trace, first: usize) -> Option<String> {
    let analysis = Analysis::new(&s.topology, &*s.metric, &s.byzantine).ok()?;
    let watched: BTreeSet<ProcessId> = analysis.sb_correct().into_iter().collect();
    if let Some(i) = trace.annotations[first..].iter().position(|a| !a.sb_spec) {
        return Some(format!("predicate lost at configuration {}", first + i));
    }
    for step in &trace.steps[first..] {
        if let Some(c) = step.changes.iter().find(|c| watched.contains(&c.process)) {
            return Some(format!("{} moved at step {}", c.process, step.index));
        }
    }
    let recorded = trace.steps.len() - first;
    if recorded < FROZEN_STEPS && !trace.silent {
        return Some(format!("only {recorded} steps recorded after containment"));
    }
    None
}

fn criterion_6(runs: &[&Observed]) -> Verdict {
    let failures: Vec<String> = runs
        .iter()
        .filter(|o| !o.trace.annotations.is_empty())
        .flat_map(|o| closure_violations(&o.trace).into_iter().map(move |v| format!("{}: {v:?}", o.label)))
        .collect();
    verdict(&failures, format!("{} traces, IM and LC closure per rung", runs.len()))
}

fn criterion_7(runs: &[Observed]) -> Verdict {
    let mut failures = Vec::new();
    let mut rungs = 0;
    let mut witnessed = 0;
    for o in runs.iter().filter(|o| !o.trace.annotations.is_empty()) {
        let progress = ladder_progress(&o.trace);
        for i in 0..progress.len().saturating_sub(1) {
            rungs += 1;
            let (p, next) = (&progress[i], progress[i + 1].lc);
            let ordered = match (p.dist_saturated, p.level_decayed, next) {
                (Some(a), Some(b), Some(c)) => {
                    witnessed += 1;
                    a <= b && b <= c
                }
                (_, _, None) => true,
                _ => false,
            };
            if !ordered {
                failures.push(format!("{} rung {i}: {p:?}, next LC {next:?}", o.label));
            }
        }
    }
    verdict(&failures, format!("{rungs} rungs ({witnessed} with all milestones reached) ordered dist-saturation <= level-decay <= next LC"))
}

fn criterion_8() -> Verdict {
    let mut failures = Vec::new();
    let mut shown = Vec::new();
    for id in CaseId::ALL {
        let case = match build_case(id) {
            Ok(c) => c,
            Err(e) => {
                failures.push(format!("{id}: {e}"));
                continue;
            }
        };
        match case.run() {
            Ok(out) => {
                let names: Vec<String> = out.disturbed.iter().map(|&v| case.scenario.topology.name(v)).collect();
                shown.push(format!("{id} {{{}}}", names.join(",")));
                if out.disturbed != case.expected_disturbed {
                    failures.push(format!("{id}: disturbed {:?}, expected {:?}", out.disturbed, case.expected_disturbed));
                }
                if !case.expected_disturbed.is_subset(&out.area.members) {
                    failures.push(format!("{id}: expected set outside S_B {:?}", out.area.members));
                }
                if !out.reached_target {
                    failures.push(format!("{id}: target shape not reached"));
                }
            }
            Err(e) => failures.push(format!("{id}: {e}")),
        }
    }
    verdict(&failures, shown.join(", "))
}

fn criterion_9(corpus: &[(Topology, SharedMetric)]) -> Verdict {
    let dir = tempfile::tempdir().expect("tempdir");
    let mut failures = Vec::new();
    let strategies = [AdversaryStrategy::Lure, AdversaryStrategy::Random, AdversaryStrategy::Oscillate];
    let mut checked = 0;
    for (g, (t, ms)) in corpus.iter().enumerate() {
        let mut s = Scenario::new(t.clone(), ms.clone());
        let b = t.processes().find(|&v| v != t.root()).expect("n >= 2");
        s.byzantine = BTreeSet::from([b]);
        s.strategy = strategies[g % strategies.len()];
        s.daemon = DaemonKind::ALL[g % DaemonKind::ALL.len()];
        s.seed = 9;
        let file = dir.path().join(format!("g{g}.json"));
        std::fs::write(&file, ScenarioFile::from_scenario(&s).to_json_string()).expect("write scenario");
        let once = |tag: &str| {
            let trace = dir.path().join(format!("g{g}-{tag}.jsonl"));
            let out = cmd_run(&file, RunFlags { trace: Some(trace.clone()), json: true, ..Default::default() });
            out.map(|o| (o.stdout, std::fs::read(trace).unwrap_or_default())).map_err(|e| e.to_string())
        };
        match (once("a"), once("b")) {
            (Ok(a), Ok(b)) if a == b => checked += 1,
            (Ok(_), Ok(_)) => failures.push(format!("graph {g}: outputs differ")),
            (a, b) => failures.push(format!("graph {g}: {:?} {:?}", a.err(), b.err())),
        }
    }
    verdict(&failures, format!("{checked} scenarios rerun with byte-identical report and trace"))
}

fn main() -> ExitCode {
    let started = Instant::now();
    let mut lines: Vec<(u8, &str, Verdict)> = Vec::new();
    let mut report = |id: u8, name: &'static str, v: Verdict| {
        println!("criterion {id} [{}] {name}: {}", if v.passed { "PASS" } else { "FAIL" }, v.detail);
        lines.push((id, name, v));
    };
    report(1, "metric characterization", criterion_1());
    let mu = mu_corpus();
    report(2, "mu oracle equivalence", criterion_2(&mu));
    report(3, "neighborhood bound", criterion_3(&mu));
    let corpus = run_corpus();
    let (v4, fault_free) = criterion_4(&corpus);
    report(4, "fault-free self-stabilization", v4);
    let (v5, byzantine) = criterion_5(&corpus);
    report(5, "topology-aware strict stabilization", v5);
    let all: Vec<&Observed> = fault_free.iter().chain(&byzantine).collect();
    report(6, "closure", criterion_6(&all));
    report(7, "ladder milestones", criterion_7(&byzantine));
    report(8, "impossibility demos", criterion_8());
    report(9, "determinism", criterion_9(&corpus));
    let failed = lines.iter().filter(|(_, _, v)| !v.passed).count();
    println!("acceptance: {} of {} criteria pass ({:.1}s)", lines.len() - failed, lines.len(), started.elapsed().as_secs_f64());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
