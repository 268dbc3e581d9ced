//! Timed automata with invariants, finite/repeated acceptance sets, and
//! timed words with exact rational delays.

use std::collections::BTreeSet;

use num_rational::Ratio;

use crate::alphabet::{EventAlphabet, Label};
use crate::error::{Error, Result};
use crate::timed::constraint::ClockConstraint;

/// Exact time value used for delays and zone bounds.
pub type Rational = Ratio<i64>;

pub fn rational(n: i64, d: i64) -> Rational {
    Ratio::new(n, d)
}

/// Parses `"p/q"` or a plain integer string into a non-negative rational.
pub fn parse_rational(text: &str) -> Result<Rational> {
    let text = text.trim();
    let value = if let Some((num, den)) = text.split_once('/') {
        let n: i64 = num
            .trim()
            .parse()
            .map_err(|_| Error::input(format!("`{text}` is not a rational")))?;
        let d: i64 = den
            .trim()
            .parse()
            .map_err(|_| Error::input(format!("`{text}` is not a rational")))?;
        if d == 0 {
            return Err(Error::input(format!("`{text}` has zero denominator")));
        }
        Ratio::new(n, d)
    } else {
        let n: i64 = text
            .parse()
            .map_err(|_| Error::input(format!("`{text}` is not a rational")))?;
        Ratio::from_integer(n)
    };
    if value < Ratio::from_integer(0) {
        return Err(Error::input(format!("`{text}` is negative")));
    }
    Ok(value)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaEdge {
    pub src: usize,
    pub guard: ClockConstraint,
    pub label: Label,
    /// Indices into `TimedAutomaton::clocks`, kept sorted.
    pub resets: BTreeSet<usize>,
    pub dst: usize,
}

/// Timed automaton.  Locations and clocks are addressed by index into the
/// respective name tables; `invariants[i]` constrains location `i` and uses
/// upper bounds only.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimedAutomaton {
    pub locations: Vec<String>,
    pub initial: usize,
    pub clocks: Vec<String>,
    pub alphabet: EventAlphabet,
    pub edges: Vec<TaEdge>,
    pub invariants: Vec<ClockConstraint>,
    pub final_states: BTreeSet<usize>,
    pub repeated: BTreeSet<usize>,
}

/// Timed word: alternating delays and events, beginning and ending with a
/// delay, so `delays.len() == events.len() + 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimedWord {
    pub delays: Vec<Rational>,
    pub events: Vec<String>,
}

impl TimedWord {
    pub fn empty() -> Self {
        TimedWord { delays: vec![Rational::from_integer(0)], events: Vec::new() }
    }

    pub fn new(delays: Vec<Rational>, events: Vec<String>) -> Result<Self> {
        if delays.len() != events.len() + 1 {
            return Err(Error::input(
                "timed word needs exactly one more delay than events".to_string(),
            ));
        }
        if delays.iter().any(|d| *d < Rational::from_integer(0)) {
            return Err(Error::input("timed word has a negative delay".to_string()));
        }
        Ok(TimedWord { delays, events })
    }

    pub fn duration(&self) -> Rational {
        self.delays.iter().sum()
    }

    /// Projection onto the observable events; delays around erased events
    /// merge, so the duration is preserved.
    pub fn project(&self, alphabet: &EventAlphabet) -> TimedWord {
        let mut delays = vec![self.delays[0]];
        let mut events = Vec::new();
        for (i, ev) in self.events.iter().enumerate() {
            let next = self.delays[i + 1];
            if alphabet.is_observable(ev) {
                events.push(ev.clone());
                delays.push(next);
            } else {
                *delays.last_mut().unwrap() += next;
            }
        }
        TimedWord { delays, events }
    }

    /// Multiplies every delay by `factor`.
    pub fn scale(&self, factor: u64) -> TimedWord {
        TimedWord {
            delays: self
                .delays
                .iter()
                .map(|d| d * Rational::from_integer(factor as i64))
                .collect(),
            events: self.events.clone(),
        }
    }
}

impl TimedAutomaton {
    pub fn location_index(&self, name: &str) -> Option<usize> {
        self.locations.iter().position(|l| l == name)
    }

    pub fn location_name(&self, idx: usize) -> &str {
        &self.locations[idx]
    }

    pub fn clock_index(&self, name: &str) -> Option<usize> {
        self.clocks.iter().position(|c| c == name)
    }

    pub fn is_fault_edge(&self, e: &TaEdge) -> bool {
        self.alphabet.is_fault(&e.label)
    }

    /// Locations with at least one outgoing fault edge (enabledness of the
    /// guard at a concrete state is checked by the symbolic engines).
    pub fn fault_edge_sources(&self) -> BTreeSet<usize> {
        self.edges
            .iter()
            .filter(|e| self.is_fault_edge(e))
            .map(|e| e.src)
            .collect()
    }

    /// Largest constant compared against each clock across guards and
    /// invariants; clocks never compared get 0.  This is the per-clock bound
    /// the region abstraction and zone extrapolation are built on.
    pub fn max_constants(&self) -> Vec<u64> {
        let mut max = vec![0u64; self.clocks.len()];
        let mut scan = |c: &ClockConstraint| {
            for atom in &c.atoms {
                if let Some(i) = self.clock_index(&atom.clock) {
                    max[i] = max[i].max(atom.constant);
                }
            }
        };
        for inv in &self.invariants {
            scan(inv);
        }
        for e in &self.edges {
            scan(&e.guard);
        }
        max
    }

    /// Relabels unobservable events to the silent label (fault edges
    /// included if the fault is unobservable).
    pub fn hide_unobservable(&self) -> TimedAutomaton {
        let mut out = self.clone();
        for e in &mut out.edges {
            if !self.alphabet.label_observable(&e.label) {
                e.label = Label::Silent;
            }
        }
        out
    }

    /// Copy without fault-labeled edges.
    pub fn without_fault_edges(&self) -> TimedAutomaton {
        let mut out = self.clone();
        out.edges.retain(|e| !self.is_fault_edge(e));
        out
    }

    /// Drops locations not reachable over the edge graph (guards ignored),
    /// remapping indices and invariants.
    pub fn prune_unreachable(&self) -> TimedAutomaton {
        let mut seen = vec![false; self.locations.len()];
        let mut order = vec![self.initial];
        seen[self.initial] = true;
        let mut frontier = 0;
        while frontier < order.len() {
            let q = order[frontier];
            frontier += 1;
            for e in &self.edges {
                if e.src == q && !seen[e.dst] {
                    seen[e.dst] = true;
                    order.push(e.dst);
                }
            }
        }
        // Keep declaration order for determinism.
        let keep: Vec<usize> = (0..self.locations.len()).filter(|&i| seen[i]).collect();
        self.restrict_to(&keep)
    }

    /// Sub-automaton induced by `keep`; must contain the initial location.
    pub fn restrict_to(&self, keep: &[usize]) -> TimedAutomaton {
        let mut map = vec![usize::MAX; self.locations.len()];
        for (new, &old) in keep.iter().enumerate() {
            map[old] = new;
        }
        assert!(map[self.initial] != usize::MAX, "initial location dropped");
        TimedAutomaton {
            locations: keep.iter().map(|&i| self.locations[i].clone()).collect(),
            initial: map[self.initial],
            clocks: self.clocks.clone(),
            alphabet: self.alphabet.clone(),
            edges: self
                .edges
                .iter()
                .filter(|e| map[e.src] != usize::MAX && map[e.dst] != usize::MAX)
                .map(|e| TaEdge {
                    src: map[e.src],
                    guard: e.guard.clone(),
                    label: e.label.clone(),
                    resets: e.resets.clone(),
                    dst: map[e.dst],
                })
                .collect(),
            invariants: keep.iter().map(|&i| self.invariants[i].clone()).collect(),
            final_states: self
                .final_states
                .iter()
                .filter(|&&s| map[s] != usize::MAX)
                .map(|&s| map[s])
                .collect(),
            repeated: self
                .repeated
                .iter()
                .filter(|&&s| map[s] != usize::MAX)
                .map(|&s| map[s])
                .collect(),
        }
    }

    /// Removes clocks that no guard or invariant reads.  Resets of such
    /// clocks are dead and disappear with them.  Keeps symbolic state spaces
    /// small after constructions that orphan clocks.
    pub fn drop_unused_clocks(&self) -> TimedAutomaton {
        let mut used = vec![false; self.clocks.len()];
        let scan = |c: &ClockConstraint, used: &mut Vec<bool>| {
            for atom in &c.atoms {
                if let Some(i) = self.clock_index(&atom.clock) {
                    used[i] = true;
                }
            }
        };
        for inv in &self.invariants {
            scan(inv, &mut used);
        }
        for e in &self.edges {
            scan(&e.guard, &mut used);
        }
        if used.iter().all(|&u| u) {
            return self.clone();
        }
        let keep: Vec<usize> = (0..self.clocks.len()).filter(|&i| used[i]).collect();
        let mut map = vec![usize::MAX; self.clocks.len()];
        for (new, &old) in keep.iter().enumerate() {
            map[old] = new;
        }
        let mut out = self.clone();
        out.clocks = keep.iter().map(|&i| self.clocks[i].clone()).collect();
        for e in &mut out.edges {
            e.resets = e
                .resets
                .iter()
                .filter(|&&c| map[c] != usize::MAX)
                .map(|&c| map[c])
                .collect();
        }
        out
    }

    /// Multiplies every guard and invariant constant by `factor`.
    pub fn scale_constants(&self, factor: u64) -> TimedAutomaton {
        let mut out = self.clone();
        for e in &mut out.edges {
            e.guard = e.guard.scale_constants(factor);
        }
        for inv in &mut out.invariants {
            *inv = inv.scale_constants(factor);
        }
        out
    }

    /// Renames every clock through `f` (guards and invariants follow the
    /// clock table, which stores the new names).
    pub fn rename_clocks(&self, f: impl Fn(&str) -> String) -> TimedAutomaton {
        let mut out = self.clone();
        out.clocks = self.clocks.iter().map(|c| f(c)).collect();
        for e in &mut out.edges {
            e.guard = e.guard.rename_clocks(&f);
        }
        for inv in &mut out.invariants {
            *inv = inv.rename_clocks(&f);
        }
        out
    }

    /// Picks a clock name not yet in the clock table.
    pub fn fresh_clock(&self, base: &str) -> String {
        if self.clock_index(base).is_none() {
            return base.to_string();
        }
        let mut i = 0u32;
        loop {
            let candidate = format!("{base}{i}");
            if self.clock_index(&candidate).is_none() {
                return candidate;
            }
            i += 1;
        }
    }

    /// Picks a location name not yet in the location table.
    pub fn fresh_location(&self, base: &str) -> String {
        if self.location_index(base).is_none() {
            return base.to_string();
        }
        let mut i = 0u32;
        loop {
            let candidate = format!("{base}{i}");
            if self.location_index(&candidate).is_none() {
                return candidate;
            }
            i += 1;
        }
    }
}
