//! Graphviz rendering of a configuration over its topology.

use std::fmt::Write;

use crate::analysis::ContainmentArea;
use crate::protocol::Configuration;
use crate::topology::{ProcessId, Topology};

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn role(v: ProcessId, t: &Topology, area: &ContainmentArea) -> (&'static str, &'static str) {
    if v == t.root() {
        ("root", "lightblue")
    } else if area.byzantine.contains(&v) {
        ("byzantine", "salmon")
    } else if area.members.contains(&v) {
        ("containment", "khaki")
    } else {
        ("correct", "white")
    }
}

/// Undirected graph edges carry weights (dashed); `prnt` pointers are drawn
/// as bold arrows from child to parent.
pub fn render(t: &Topology, cfg: &Configuration, area: &ContainmentArea) -> String {
    let mut out = String::from("digraph ssmax {\n  node [style=filled];\n");
    for v in t.processes() {
        let s = &cfg[v];
        let (role, color) = role(v, t, area);
        let label = format!("{} ({})\nlevel={}\ndist={}", t.name(v), v, s.level, s.dist);
        writeln!(out, "  n{v} [label={}, role={role}, fillcolor={color}];", quote(&label)).unwrap();
    }
    for (u, v, w) in t.edges() {
        writeln!(out, "  n{u} -> n{v} [dir=none, style=dashed, color=gray, label={}];", quote(&w.to_string())).unwrap();
    }
    for v in t.processes() {
        if let Some(p) = cfg[v].prnt {
            writeln!(out, "  n{v} -> n{p} [style=bold, tree=true];").unwrap();
        }
    }
    out.push_str("}\n");
    out
}
