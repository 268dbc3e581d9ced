//! Model diagnostics beyond what parsing enforces.
//!
//! Parsing already rejects structural problems outright (unknown fields,
//! undeclared events or clocks, the reserved `eps` name).  The checks here
//! look at the model's behaviour instead: locations where time can stall
//! forever, and silent cycles that would let the system run on without ever
//! producing an observation.  Both are advisory — the engines stay correct on
//! such models, but online estimates can go blind.

use std::collections::{BTreeSet, VecDeque};
use std::path::Path;

use petgraph::algo::is_cyclic_directed;
use petgraph::graph::DiGraph;

use crate::fa::FiniteAutomaton;
use crate::model::{load_model, parse_model, Model};
use crate::ta_predict::normalize;
use crate::timed::region::{region_graph, RegionMove};
use crate::timed::ta::TimedAutomaton;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub message: String,
}

impl Diagnostic {
    fn warning(message: impl Into<String>) -> Diagnostic {
        Diagnostic { severity: Severity::Warning, message: message.into() }
    }

    fn error(message: impl Into<String>) -> Diagnostic {
        Diagnostic { severity: Severity::Error, message: message.into() }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LintOptions {
    /// Accept locations whose invariant never forces time to move on.
    pub unbounded_ok: bool,
}

/// Parses and lints a model file.  Parse failures come back as a single
/// error diagnostic (malformed JSON keeps serde's line/column text).
pub fn validate_file(path: &Path, opts: &LintOptions) -> Vec<Diagnostic> {
    match load_model(path) {
        Ok(model) => lint(&model, opts),
        Err(e) => vec![Diagnostic::error(e.to_string())],
    }
}

/// Same as [`validate_file`], from in-memory text.
pub fn validate_text(text: &str, opts: &LintOptions) -> Vec<Diagnostic> {
    match parse_model(text) {
        Ok(model) => lint(&model, opts),
        Err(e) => vec![Diagnostic::error(e.to_string())],
    }
}

pub fn lint(model: &Model, opts: &LintOptions) -> Vec<Diagnostic> {
    match model {
        Model::Fa(a) => lint_fa(a),
        Model::Ta(a) => lint_ta(a, opts),
    }
}

fn lint_fa(a: &FiniteAutomaton) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let reachable: BTreeSet<usize> = a.forward_reachable().into_iter().collect();
    let mut g: DiGraph<(), ()> = DiGraph::new();
    let idx: Vec<_> = a.locations.iter().map(|_| g.add_node(())).collect();
    for e in &a.edges {
        if reachable.contains(&e.src) && !a.alphabet.label_observable(&e.label) {
            g.add_edge(idx[e.src], idx[e.dst], ());
        }
    }
    if is_cyclic_directed(&g) {
        out.push(silent_cycle_warning());
    }
    out
}

fn lint_ta(a: &TimedAutomaton, opts: &LintOptions) -> Vec<Diagnostic> {
    // Lint the machine the engines actually run on: with the fault sink in
    // place, edges into a user-declared sink are redirected and that sink may
    // drop out of the reachable part entirely.
    let normalized;
    let subject = if a.alphabet.fault.is_some() {
        match normalize(a) {
            Ok(n) => {
                normalized = n;
                &normalized.ta
            }
            Err(e) => return vec![Diagnostic::error(e.to_string())],
        }
    } else {
        a
    };

    let mut out = Vec::new();
    if !opts.unbounded_ok {
        for &loc in &syntactic_reachable(subject) {
            if subject.invariants[loc].atoms.is_empty() {
                out.push(Diagnostic::warning(format!(
                    "location \"{}\" has no invariant upper bound; time can stall there forever",
                    subject.locations[loc]
                )));
            }
        }
    }

    match region_graph(subject) {
        Ok(g) => {
            let mut pg: DiGraph<(), ()> = DiGraph::new();
            let idx: Vec<_> = g.nodes.iter().map(|_| pg.add_node(())).collect();
            for e in &g.edges {
                let silent = match e.mv {
                    RegionMove::Delay => true,
                    RegionMove::Step(ei) => {
                        !subject.alphabet.label_observable(&subject.edges[ei].label)
                    }
                };
                if silent {
                    pg.add_edge(idx[e.src], idx[e.dst], ());
                }
            }
            if is_cyclic_directed(&pg) {
                out.push(silent_cycle_warning());
            }
        }
        Err(e) => out.push(Diagnostic::warning(format!(
            "silent-cycle check did not finish: {e}"
        ))),
    }
    out
}

fn silent_cycle_warning() -> Diagnostic {
    Diagnostic::warning(
        "the model can run forever without a single further observation \
         (reachable silent cycle); online estimates may go blind",
    )
}

fn syntactic_reachable(a: &TimedAutomaton) -> Vec<usize> {
    let mut seen = vec![false; a.locations.len()];
    seen[a.initial] = true;
    let mut queue = VecDeque::from([a.initial]);
    while let Some(loc) = queue.pop_front() {
        for e in a.edges.iter().filter(|e| e.src == loc) {
            if !seen[e.dst] {
                seen[e.dst] = true;
                queue.push_back(e.dst);
            }
        }
    }
    (0..a.locations.len()).filter(|&i| seen[i]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn no_errors(diags: &[Diagnostic]) -> bool {
        diags.iter().all(|d| d.severity != Severity::Error)
    }

    #[test]
    fn sink_without_invariant_is_fine_once_the_fault_is_redirected() {
        // mirrors the bundled burst model: the declared sink has no invariant,
        // but after fault redirection it is unreachable
        let diags = validate_text(
            r#"{
            "type": "ta",
            "locations": ["l0", "l1", "sink"],
            "initial": "l0",
            "clocks": ["x"],
            "events": {"observable": ["a"], "unobservable": ["f"], "fault": "f"},
            "invariants": {"l0": "x<=8", "l1": "x<=1"},
            "edges": [
                {"src": "l0", "guard": "x>=6 && x<=8", "event": "f", "dst": "sink"},
                {"src": "l0", "guard": "x<1", "event": "eps", "resets": ["x"], "dst": "l1"},
                {"src": "l1", "guard": "x==1", "event": "a", "resets": ["x"], "dst": "l1"},
                {"src": "sink", "event": "a", "dst": "sink"}
            ]
        }"#,
            &LintOptions::default(),
        );
        assert_eq!(diags, Vec::new());
    }

    #[test]
    fn missing_upper_bound_is_reported_and_waivable() {
        let text = r#"{
            "type": "ta",
            "locations": ["l0"],
            "initial": "l0",
            "clocks": ["x"],
            "events": {"observable": ["a"], "unobservable": []},
            "invariants": {},
            "edges": [{"src": "l0", "guard": "x>=1", "event": "a", "resets": ["x"], "dst": "l0"}]
        }"#;
        let diags = validate_text(text, &LintOptions::default());
        assert!(diags.iter().any(|d| {
            d.severity == Severity::Warning && d.message.contains("no invariant upper bound")
        }));
        let waived = validate_text(text, &LintOptions { unbounded_ok: true });
        assert!(!waived.iter().any(|d| d.message.contains("upper bound")));
    }

    #[test]
    fn reserved_event_name_is_fatal() {
        let diags = validate_text(
            r#"{
            "type": "fa",
            "locations": ["p"],
            "initial": "p",
            "events": {"observable": ["eps"], "unobservable": []},
            "edges": []
        }"#,
            &LintOptions::default(),
        );
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].severity, Severity::Error);
        assert!(diags[0].message.contains("reserved"));
    }

    #[test]
    fn malformed_json_keeps_position_information() {
        let diags = validate_text("{ nope", &LintOptions::default());
        assert_eq!(diags[0].severity, Severity::Error);
        assert!(diags[0].message.contains("line 1"));
    }

    #[test]
    fn unobservable_cycle_is_flagged_on_plain_machines() {
        let diags = validate_text(
            r#"{
            "type": "fa",
            "locations": ["p", "q"],
            "initial": "p",
            "events": {"observable": ["a"], "unobservable": ["u"]},
            "edges": [
                {"src": "p", "event": "u", "dst": "q"},
                {"src": "q", "event": "u", "dst": "p"},
                {"src": "p", "event": "a", "dst": "p"}
            ]
        }"#,
            &LintOptions::default(),
        );
        assert!(no_errors(&diags));
        assert!(diags.iter().any(|d| d.message.contains("silent cycle")));
    }

    #[test]
    fn silent_loop_with_time_is_flagged_on_timed_machines() {
        let diags = validate_text(
            r#"{
            "type": "ta",
            "locations": ["l0"],
            "initial": "l0",
            "clocks": ["x"],
            "events": {"observable": ["a"], "unobservable": []},
            "invariants": {"l0": "x<=2"},
            "edges": [{"src": "l0", "guard": "x==1", "event": "eps", "resets": ["x"], "dst": "l0"}]
        }"#,
            &LintOptions::default(),
        );
        assert!(diags.iter().any(|d| d.message.contains("silent cycle")));
    }

    #[test]
    fn observable_loop_raises_nothing() {
        let diags = validate_text(
            r#"{
            "type": "ta",
            "locations": ["l0"],
            "initial": "l0",
            "clocks": ["x"],
            "events": {"observable": ["a"], "unobservable": []},
            "invariants": {"l0": "x<=2"},
            "edges": [{"src": "l0", "guard": "x==1", "event": "a", "resets": ["x"], "dst": "l0"}]
        }"#,
            &LintOptions::default(),
        );
        assert_eq!(diags, Vec::new());
    }
}
