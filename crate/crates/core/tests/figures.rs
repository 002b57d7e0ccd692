use std::collections::BTreeSet;

use ssmax_core::analysis::compute_mu_bruteforce;
use ssmax_core::faults::{lure, AdversaryContext};
use ssmax_core::metric::MetricValue;
use ssmax_core::protocol::{Configuration, ProcessState, Protocol};
use ssmax_core::scenarios::build_figure_examples;
use ssmax_core::topology::ProcessId;

/// `S_B` straight from its definition, using the exhaustive path oracle.
fn area_by_definition(fig: &ssmax_core::scenarios::FigureExample) -> BTreeSet<ProcessId> {
    let t = &fig.topology;
    let ms = &*fig.metric;
    let from_root = compute_mu_bruteforce(t, ms, t.root()).unwrap();
    let from_byz: Vec<Vec<MetricValue>> =
        fig.byzantine.iter().map(|&b| compute_mu_bruteforce(t, ms, b).unwrap()).collect();
    t.processes()
        .filter(|&v| v != t.root() && !fig.byzantine.contains(&v))
        .filter(|&v| {
            from_byz.iter().any(|col| ms.precedes_or_eq(&from_root[v.0], &col[v.0]))
        })
        .collect()
}

#[test]
fn figure_areas_match_the_definition() {
    let figs = build_figure_examples().unwrap();
    let names: Vec<&str> = figs.iter().map(|f| f.name.as_str()).collect();
    assert_eq!(names, ["sp-left", "sp-right", "flow-left", "flow-right", "reliability-left", "reliability-right"]);
    for fig in &figs {
        assert_eq!(fig.area.members, area_by_definition(fig), "{}", fig.name);
        assert!(fig.topology.validate().is_empty(), "{}", fig.name);
        assert!(fig.topology.validate_weights(&*fig.metric).is_empty(), "{}", fig.name);
    }
}

#[test]
fn all_zero_shortest_path_weights_put_every_tie_in_the_area() {
    let figs = build_figure_examples().unwrap();
    let zero = figs.iter().find(|f| f.name == "sp-right").unwrap();
    // Every process is at distance 0 from both r and b, and ties count.
    let expected: BTreeSet<ProcessId> = (1..=4).map(ProcessId).collect();
    assert_eq!(zero.area.members, expected);
}

#[test]
fn flow_byzantine_lures_with_the_root_level() {
    let figs = build_figure_examples().unwrap();
    for fig in figs.iter().filter(|f| f.name.starts_with("flow")) {
        let t = &fig.topology;
        let cfg = Configuration::new(vec![ProcessState::rooted(fig.metric.root_value()); t.len()]);
        let weakest = MetricValue::Nat(0);
        let ctx = AdversaryContext {
            protocol: Protocol::new(t, &*fig.metric),
            config: &cfg,
            process: ProcessId(5),
            step: 0,
            weakest: &weakest,
        };
        assert_eq!(lure(&ctx).level, MetricValue::Nat(10), "{}", fig.name);
    }
}
