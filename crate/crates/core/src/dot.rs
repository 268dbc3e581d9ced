//! Graphviz (DOT) rendering of automata and region graphs.
//!
//! One node per location (no pseudo-nodes), one arrow per edge, everything
//! emitted in declaration order, so node and edge counts in the text agree
//! exactly with the structure being rendered and the bytes are stable.

use std::fmt::Write as _;

use crate::fa::FiniteAutomaton;
use crate::timed::region::{ClockStatus, RegionGraph, RegionMove};
use crate::timed::ta::TimedAutomaton;

fn escape(text: &str) -> String {
    text.replace('\\', "\\\\").replace('"', "\\\"")
}

fn node_attrs(initial: bool, accepting: bool) -> String {
    let mut attrs = Vec::new();
    if accepting {
        attrs.push("shape=doublecircle");
    }
    if initial {
        attrs.push("style=bold");
    }
    if attrs.is_empty() {
        String::new()
    } else {
        format!(", {}", attrs.join(", "))
    }
}

/// DOT text for a finite automaton; accepting and repeated locations are
/// double circles, the initial location is bold.
pub fn fa_dot(a: &FiniteAutomaton, name: &str) -> String {
    let mut out = format!("digraph \"{}\" {{\n  rankdir=LR;\n", escape(name));
    for (i, loc) in a.locations.iter().enumerate() {
        let accepting = a.final_states.contains(&i) || a.repeated.contains(&i);
        let _ = writeln!(
            out,
            "  n{i} [label=\"{}\"{}];",
            escape(loc),
            node_attrs(i == a.initial, accepting)
        );
    }
    for e in &a.edges {
        let _ = writeln!(
            out,
            "  n{} -> n{} [label=\"{}\"];",
            e.src,
            e.dst,
            escape(e.label.display())
        );
    }
    out.push_str("}\n");
    out
}

/// DOT text for a timed automaton.  Location labels carry the invariant when
/// it is not `true`; edge labels stack event, guard, and resets.
pub fn ta_dot(a: &TimedAutomaton, name: &str) -> String {
    let mut out = format!("digraph \"{}\" {{\n  rankdir=LR;\n", escape(name));
    for (i, loc) in a.locations.iter().enumerate() {
        let inv = &a.invariants[i];
        let label = if inv.atoms.is_empty() {
            loc.clone()
        } else {
            format!("{loc}\\n{inv}")
        };
        let accepting = a.final_states.contains(&i) || a.repeated.contains(&i);
        let _ = writeln!(
            out,
            "  n{i} [label=\"{}\"{}];",
            escape(&label),
            node_attrs(i == a.initial, accepting)
        );
    }
    for e in &a.edges {
        let mut label = e.label.display().to_string();
        if !e.guard.atoms.is_empty() {
            let _ = write!(label, "\\n{}", e.guard);
        }
        if !e.resets.is_empty() {
            let names: Vec<&str> =
                e.resets.iter().map(|&c| a.clocks[c].as_str()).collect();
            let _ = write!(label, "\\n{{{}}}", names.join(","));
        }
        let _ = writeln!(
            out,
            "  n{} -> n{} [label=\"{}\"];",
            e.src,
            e.dst,
            escape(&label)
        );
    }
    out.push_str("}\n");
    out
}

fn region_label(a: &TimedAutomaton, g: &RegionGraph, node: usize) -> String {
    let n = &g.nodes[node];
    let mut parts = Vec::new();
    for (c, clock) in a.clocks.iter().enumerate() {
        parts.push(match n.region.status(c) {
            ClockStatus::At(k) => format!("{clock}={k}"),
            ClockStatus::Frac { int, rank } => {
                format!("{int}<{clock}<{}#{rank}", int + 1)
            }
            ClockStatus::Unbounded => format!("{clock}=hi"),
        });
    }
    if parts.is_empty() {
        a.locations[n.location].clone()
    } else {
        format!("{}\\n{}", a.locations[n.location], parts.join(" "))
    }
}

/// DOT text for a region graph over its automaton: delay moves are dashed,
/// discrete moves carry the event of the edge they follow.
pub fn region_dot(a: &TimedAutomaton, g: &RegionGraph) -> String {
    let mut out = String::from("digraph \"regions\" {\n  rankdir=LR;\n");
    for i in 0..g.nodes.len() {
        let _ = writeln!(
            out,
            "  r{i} [label=\"{}\"{}];",
            escape(&region_label(a, g, i)),
            node_attrs(g.initial == Some(i), g.repeated.contains(&i))
        );
    }
    for e in &g.edges {
        match e.mv {
            RegionMove::Delay => {
                let _ = writeln!(
                    out,
                    "  r{} -> r{} [label=\"delay\", style=dashed];",
                    e.src, e.dst
                );
            }
            RegionMove::Step(ei) => {
                let _ = writeln!(
                    out,
                    "  r{} -> r{} [label=\"{}\"];",
                    e.src,
                    e.dst,
                    escape(a.edges[ei].label.display())
                );
            }
        }
    }
    out.push_str("}\n");
    out
}
