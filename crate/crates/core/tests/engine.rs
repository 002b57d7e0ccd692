use std::collections::BTreeSet;
use std::sync::Arc;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ssmax_core::faults::AdversaryStrategy;
use ssmax_core::metric::{Flow, MetricSpace, Reliability, SharedMetric, ShortestPath, Weight};
use ssmax_core::protocol::Protocol;
use ssmax_core::runtime::{
    longest_wait, random_configuration, replay_check, DaemonKind, Engine, InitialConfig, Scenario, Trace,
};
use ssmax_core::topology::{random_connected, ProcessId, Topology};

fn metric(i: usize) -> SharedMetric {
    match i % 3 {
        0 => Arc::new(ShortestPath::new()),
        1 => Arc::new(Flow::new(6)),
        _ => Arc::new(Reliability::quarters()),
    }
}

fn graph(ms: &dyn MetricSpace, n: usize, seed: u64) -> Topology {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_connected(n, 0.3, &mut rng, |r| match ms.name().as_str() {
        "sp" => Weight::Nat(r.gen_range(0..=4)),
        "reliability" => Weight::real(r.gen_range(1..=4), 4),
        _ => Weight::Nat(r.gen_range(0..=6)),
    })
}

fn pick_byzantine(t: &Topology, seed: u64) -> BTreeSet<ProcessId> {
    let candidates: Vec<ProcessId> = t.processes().filter(|&v| v != t.root()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let k = rng.gen_range(0..=candidates.len().min(2));
    candidates.into_iter().filter(|_| rng.gen_bool(0.5)).take(k).collect()
}

fn run(s: &Scenario) -> Trace {
    Engine::new(s).unwrap().run_default().unwrap().trace
}

fn scenario(n: usize, m: usize, daemon: usize, strategy: usize, seed: u64) -> Scenario {
    let ms = metric(m);
    let t = graph(&*ms, n, seed);
    let mut s = Scenario::new(t, ms);
    s.byzantine = pick_byzantine(&s.topology, seed);
    s.daemon = DaemonKind::ALL[daemon];
    s.strategy = AdversaryStrategy::ALL[strategy];
    s.seed = seed;
    s.max_steps = Some(600);
    s.containment_horizon = 40;
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn same_seed_same_trace(n in 3usize..=7, m in 0usize..3, d in 0usize..4, st in 0usize..4, seed in any::<u64>()) {
        let s = scenario(n, m, d, st, seed);
        let a = run(&s);
        let b = run(&s);
        let (mut ja, mut jb) = (Vec::new(), Vec::new());
        a.write_jsonl(&*s.metric, &mut ja).unwrap();
        b.write_jsonl(&*s.metric, &mut jb).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(ja, jb);
    }

    #[test]
    fn traces_replay_and_respect_fairness(n in 3usize..=7, m in 0usize..3, d in 0usize..4, st in 0usize..4, seed in any::<u64>()) {
        let s = scenario(n, m, d, st, seed);
        let trace = run(&s);
        let proto = Protocol::new(&s.topology, &*s.metric);
        prop_assert_eq!(replay_check(&trace, &proto), Ok(()));
        if let Some((v, wait)) = longest_wait(&trace) {
            prop_assert!(wait < s.fairness(), "{} waited {} with F = {}", v, wait, s.fairness());
        }
        // The top of the metric order bounds every level, so IM at mr always holds.
        prop_assert!(trace.annotations.iter().all(|a| a.im[0]));
    }

    /// A Byzantine process that runs the protocol is indistinguishable from a
    /// correct one under the synchronous daemon.
    #[test]
    fn simulate_correct_matches_fault_free(n in 3usize..=7, m in 0usize..3, seed in any::<u64>()) {
        let ms = metric(m);
        let t = graph(&*ms, n, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let init = random_configuration(&t, &*ms, &BTreeSet::new(), &mut rng).unwrap();
        let mut base = Scenario::new(t.clone(), ms.clone());
        base.daemon = DaemonKind::Synchronous;
        base.init = InitialConfig::Explicit(init);
        base.max_steps = Some(400);
        // Long enough that both runs end by going silent, not by the horizon.
        base.containment_horizon = 400;
        let b = t.processes().find(|&v| v != t.root()).unwrap();
        let mut faulty = base.clone();
        faulty.byzantine = BTreeSet::from([b]);
        faulty.strategy = AdversaryStrategy::SimulateCorrect;

        let clean = run(&base);
        let sim = run(&faulty);
        prop_assert_eq!(clean.configurations(), sim.configurations());
        prop_assert!(clean.silent && sim.silent);
    }
}

#[test]
fn central_daemon_needs_fairness_at_least_n() {
    let mut s = scenario(5, 0, 0, 0, 1);
    s.daemon = DaemonKind::Central;
    s.fairness_bound = Some(4);
    assert!(Engine::new(&s).is_err());
    s.fairness_bound = Some(5);
    assert!(Engine::new(&s).is_ok());
}
