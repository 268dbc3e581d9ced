//! JSON model files: loading, validation, and export.
//!
//! One schema serves both automaton kinds, selected by `"type": "fa" | "ta"`.
//! Unknown fields are rejected so typos fail loudly.  `"eps"` is the reserved
//! silent label: usable on edges, never declarable as an event.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::alphabet::{EventAlphabet, Label, SILENT_NAME};
use crate::error::{Error, Result};
use crate::fa::{FaEdge, FiniteAutomaton};
use crate::timed::constraint::ClockConstraint;
use crate::timed::ta::{TaEdge, TimedAutomaton};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    #[serde(rename = "type")]
    kind: String,
    locations: Vec<String>,
    initial: String,
    events: RawEvents,
    #[serde(default)]
    clocks: Vec<String>,
    #[serde(default)]
    invariants: BTreeMap<String, String>,
    edges: Vec<RawEdge>,
    #[serde(rename = "final", default)]
    final_states: Vec<String>,
    #[serde(default)]
    repeated: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEvents {
    observable: Vec<String>,
    unobservable: Vec<String>,
    #[serde(default)]
    fault: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEdge {
    src: String,
    #[serde(default)]
    guard: Option<String>,
    event: String,
    #[serde(default)]
    resets: Option<Vec<String>>,
    dst: String,
}

/// A parsed model file.
#[derive(Debug, Clone)]
pub enum Model {
    Fa(FiniteAutomaton),
    Ta(TimedAutomaton),
}

impl Model {
    pub fn alphabet(&self) -> &EventAlphabet {
        match self {
            Model::Fa(a) => &a.alphabet,
            Model::Ta(a) => &a.alphabet,
        }
    }
}

pub fn load_model(path: &Path) -> Result<Model> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::input(format!("cannot read {}: {e}", path.display())))?;
    parse_model(&text)
}

pub fn parse_model(text: &str) -> Result<Model> {
    let raw: RawModel = serde_json::from_str(text)
        .map_err(|e| Error::input(format!("model JSON: {e}")))?;
    build(raw)
}

fn build(raw: RawModel) -> Result<Model> {
    let alphabet =
        EventAlphabet::new(raw.events.observable, raw.events.unobservable, raw.events.fault)?;

    let mut seen = BTreeSet::new();
    for l in &raw.locations {
        if !seen.insert(l.as_str()) {
            return Err(Error::input(format!("duplicate location \"{l}\"")));
        }
    }
    let loc_index = |name: &str, what: &str| -> Result<usize> {
        raw.locations
            .iter()
            .position(|l| l == name)
            .ok_or_else(|| Error::input(format!("{what} names unknown location \"{name}\"")))
    };
    let initial = loc_index(&raw.initial, "initial")?;
    let final_states: BTreeSet<usize> = raw
        .final_states
        .iter()
        .map(|l| loc_index(l, "final"))
        .collect::<Result<_>>()?;
    let repeated: BTreeSet<usize> = raw
        .repeated
        .iter()
        .map(|l| loc_index(l, "repeated"))
        .collect::<Result<_>>()?;

    let label_of = |event: &str| -> Result<Label> {
        if event == SILENT_NAME {
            Ok(Label::Silent)
        } else if alphabet.contains(event) {
            Ok(Label::event(event))
        } else {
            Err(Error::input(format!("edge uses undeclared event \"{event}\"")))
        }
    };

    match raw.kind.as_str() {
        "fa" => {
            if !raw.clocks.is_empty() || !raw.invariants.is_empty() {
                return Err(Error::input("clocks/invariants are not allowed in an fa model"));
            }
            let mut edges = Vec::with_capacity(raw.edges.len());
            for (i, e) in raw.edges.iter().enumerate() {
                if e.guard.is_some() || e.resets.is_some() {
                    return Err(Error::input(format!(
                        "edge #{i}: guard/resets are not allowed in an fa model"
                    )));
                }
                edges.push(FaEdge {
                    src: loc_index(&e.src, &format!("edge #{i} src"))?,
                    label: label_of(&e.event)?,
                    dst: loc_index(&e.dst, &format!("edge #{i} dst"))?,
                });
            }
            Ok(Model::Fa(FiniteAutomaton {
                locations: raw.locations,
                initial,
                alphabet,
                edges,
                final_states,
                repeated,
            }))
        }
        "ta" => {
            let mut seen_clocks = BTreeSet::new();
            for c in &raw.clocks {
                if !seen_clocks.insert(c.as_str()) {
                    return Err(Error::input(format!("duplicate clock \"{c}\"")));
                }
            }
            let check_clocks = |c: &ClockConstraint, what: &str| -> Result<()> {
                for atom in &c.atoms {
                    if !raw.clocks.iter().any(|cl| *cl == atom.clock) {
                        return Err(Error::input(format!(
                            "{what} uses undeclared clock \"{}\"",
                            atom.clock
                        )));
                    }
                }
                Ok(())
            };
            let mut edges = Vec::with_capacity(raw.edges.len());
            for (i, e) in raw.edges.iter().enumerate() {
                let ctx = format!("edge #{i} ({} -> {})", e.src, e.dst);
                let guard = match &e.guard {
                    Some(g) => ClockConstraint::parse(g, &format!("guard of {ctx}"))?,
                    None => ClockConstraint::truth(),
                };
                check_clocks(&guard, &format!("guard of {ctx}"))?;
                let mut resets = BTreeSet::new();
                for r in e.resets.iter().flatten() {
                    match raw.clocks.iter().position(|c| c == r) {
                        Some(ci) => {
                            resets.insert(ci);
                        }
                        None => {
                            return Err(Error::input(format!(
                                "{ctx} resets undeclared clock \"{r}\""
                            )))
                        }
                    }
                }
                edges.push(TaEdge {
                    src: loc_index(&e.src, &format!("edge #{i} src"))?,
                    guard,
                    label: label_of(&e.event)?,
                    resets,
                    dst: loc_index(&e.dst, &format!("edge #{i} dst"))?,
                });
            }
            let mut invariants = vec![ClockConstraint::truth(); raw.locations.len()];
            for (loc, text) in &raw.invariants {
                let li = loc_index(loc, "invariants")?;
                let c = ClockConstraint::parse(text, &format!("invariant of {loc}"))?;
                check_clocks(&c, &format!("invariant of {loc}"))?;
                if !c.upper_bounds_only() {
                    return Err(Error::input(format!(
                        "invariant of {loc} must use only < / <= atoms"
                    )));
                }
                invariants[li] = c;
            }
            Ok(Model::Ta(TimedAutomaton {
                locations: raw.locations,
                initial,
                clocks: raw.clocks,
                alphabet,
                edges,
                invariants,
                final_states,
                repeated,
            }))
        }
        other => Err(Error::input(format!(
            "model type must be \"fa\" or \"ta\", got \"{other}\""
        ))),
    }
}

#[derive(Debug, Serialize)]
struct OutModel<'a> {
    #[serde(rename = "type")]
    kind: &'a str,
    locations: &'a [String],
    initial: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    clocks: Option<&'a [String]>,
    events: OutEvents<'a>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    invariants: BTreeMap<&'a str, String>,
    edges: Vec<OutEdge<'a>>,
    #[serde(rename = "final", skip_serializing_if = "Vec::is_empty")]
    final_states: Vec<&'a str>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    repeated: Vec<&'a str>,
}

#[derive(Debug, Serialize)]
struct OutEvents<'a> {
    observable: &'a [String],
    unobservable: &'a [String],
    #[serde(skip_serializing_if = "Option::is_none")]
    fault: Option<&'a str>,
}

#[derive(Debug, Serialize)]
struct OutEdge<'a> {
    src: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    guard: Option<String>,
    event: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    resets: Vec<&'a str>,
    dst: &'a str,
}

/// Serializes a timed automaton back to the model-file schema; the result
/// re-parses to an isomorphic automaton.
pub fn ta_to_json(a: &TimedAutomaton) -> serde_json::Value {
    let out = OutModel {
        kind: "ta",
        locations: &a.locations,
        initial: &a.locations[a.initial],
        clocks: Some(&a.clocks),
        events: OutEvents {
            observable: &a.alphabet.observable,
            unobservable: &a.alphabet.unobservable,
            fault: a.alphabet.fault.as_deref(),
        },
        invariants: a
            .invariants
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_true())
            .map(|(i, c)| (a.locations[i].as_str(), c.to_string()))
            .collect(),
        edges: a
            .edges
            .iter()
            .map(|e| OutEdge {
                src: &a.locations[e.src],
                guard: if e.guard.is_true() { None } else { Some(e.guard.to_string()) },
                event: e.label.display().to_string(),
                resets: e.resets.iter().map(|&c| a.clocks[c].as_str()).collect(),
                dst: &a.locations[e.dst],
            })
            .collect(),
        final_states: a.final_states.iter().map(|&i| a.locations[i].as_str()).collect(),
        repeated: a.repeated.iter().map(|&i| a.locations[i].as_str()).collect(),
    };
    serde_json::to_value(out).expect("model serialization cannot fail")
}

/// Serializes a finite automaton back to the model-file schema.
pub fn fa_to_json(a: &FiniteAutomaton) -> serde_json::Value {
    let out = OutModel {
        kind: "fa",
        locations: &a.locations,
        initial: &a.locations[a.initial],
        clocks: None,
        events: OutEvents {
            observable: &a.alphabet.observable,
            unobservable: &a.alphabet.unobservable,
            fault: a.alphabet.fault.as_deref(),
        },
        invariants: BTreeMap::new(),
        edges: a
            .edges
            .iter()
            .map(|e| OutEdge {
                src: &a.locations[e.src],
                guard: None,
                event: e.label.display().to_string(),
                resets: Vec::new(),
                dst: &a.locations[e.dst],
            })
            .collect(),
        final_states: a.final_states.iter().map(|&i| a.locations[i].as_str()).collect(),
        repeated: a.repeated.iter().map(|&i| a.locations[i].as_str()).collect(),
    };
    serde_json::to_value(out).expect("model serialization cannot fail")
}
