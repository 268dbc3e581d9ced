//! Replaying timed words against an automaton, exactly.
//!
//! The runner keeps a set of symbolic states (location plus zone with
//! rational bounds).  Between events, edges accepted by the `free` predicate
//! may fire at any instant; the elapsed time of the current step is tracked
//! by a scratch clock so that the set can be sliced at the exact delay.

use std::collections::VecDeque;

use crate::alphabet::Label;
use crate::error::{Error, Result};
use crate::timed::constraint::Relation;
use crate::timed::ta::{Rational, TimedAutomaton, TimedWord};
use crate::timed::zone::Zone;

#[derive(Debug, Clone)]
pub struct SymbolicState {
    pub location: usize,
    pub zone: Zone,
}

const STEP_STATE_CAP: usize = 200_000;

pub struct SymbolicRunner<'a, F: Fn(&Label) -> bool> {
    a: &'a TimedAutomaton,
    free: F,
    states: Vec<SymbolicState>,
}

impl<'a, F: Fn(&Label) -> bool> SymbolicRunner<'a, F> {
    /// Starts at the initial location with all clocks zero.  The zero-delay
    /// closure is not taken here; `advance(0)` does that.
    pub fn new(a: &'a TimedAutomaton, free: F) -> Self {
        let resolve = |name: &str| a.clock_index(name);
        let mut z = Zone::zero(a.clocks.len());
        z.and_constraint(&a.invariants[a.initial], resolve);
        let states = if z.is_empty() {
            Vec::new()
        } else {
            vec![SymbolicState { location: a.initial, zone: z }]
        };
        SymbolicRunner { a, free, states }
    }

    pub fn states(&self) -> &[SymbolicState] {
        &self.states
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn replace_states(&mut self, states: Vec<SymbolicState>) {
        self.states = states;
    }

    /// Lets exactly `delay` time pass, with free edges allowed to fire at
    /// any point inside the window.
    pub fn advance(&mut self, delay: Rational) -> Result<()> {
        let a = self.a;
        let resolve = |name: &str| a.clock_index(name);
        let tau = a.clocks.len();

        // fixpoint over states reachable within the window
        let mut frontier: Vec<(usize, Zone)> = Vec::new();
        let mut queue = VecDeque::new();
        let close = |loc: usize, z: &mut Zone| {
            z.up();
            z.and_constraint(&a.invariants[loc], resolve);
            z.and_rational(tau, Relation::Le, delay);
        };
        for s in &self.states {
            let mut z = s.zone.extend_with_clock();
            z.reset(tau);
            close(s.location, &mut z);
            if !z.is_empty() {
                queue.push_back((s.location, z));
            }
        }
        let mut passed: Vec<Vec<Zone>> = vec![Vec::new(); a.locations.len()];
        while let Some((loc, z)) = queue.pop_front() {
            if passed[loc].iter().any(|p| p.includes(&z)) {
                continue;
            }
            passed[loc].retain(|p| !z.includes(p));
            passed[loc].push(z.clone());
            frontier.push((loc, z.clone()));
            if frontier.len() > STEP_STATE_CAP {
                return Err(Error::internal(
                    "state estimation exceeded the exploration cap",
                ));
            }
            for e in a.edges.iter().filter(|e| e.src == loc) {
                if !(self.free)(&e.label) {
                    continue;
                }
                let mut s = z.clone();
                if !s.and_constraint(&e.guard, resolve) || s.is_empty() {
                    continue;
                }
                for &c in &e.resets {
                    s.reset(c);
                }
                if !s.and_constraint(&a.invariants[e.dst], resolve) || s.is_empty() {
                    continue;
                }
                close(e.dst, &mut s);
                if !s.is_empty() {
                    queue.push_back((e.dst, s));
                }
            }
        }

        // slice at the exact delay and drop the scratch clock
        let mut next: Vec<SymbolicState> = Vec::new();
        for (loc, z) in frontier {
            let mut s = z;
            s.and_rational(tau, Relation::Eq, delay);
            if s.is_empty() {
                continue;
            }
            let s = s.project_out(tau);
            if next
                .iter()
                .any(|t| t.location == loc && t.zone.includes(&s))
            {
                continue;
            }
            next.retain(|t| !(t.location == loc && s.includes(&t.zone)));
            next.push(SymbolicState { location: loc, zone: s });
        }
        self.states = next;
        Ok(())
    }

    /// Fires all edges labelled with the observable event `name`.  Returns
    /// false when no state can take it (the word is not a behaviour of the
    /// automaton).
    pub fn observe(&mut self, name: &str) -> bool {
        let a = self.a;
        let resolve = |n: &str| a.clock_index(n);
        let mut next: Vec<SymbolicState> = Vec::new();
        for st in &self.states {
            for e in a.edges.iter().filter(|e| e.src == st.location) {
                if e.label.name() != Some(name) || (self.free)(&e.label) {
                    continue;
                }
                let mut s = st.zone.clone();
                if !s.and_constraint(&e.guard, resolve) || s.is_empty() {
                    continue;
                }
                for &c in &e.resets {
                    s.reset(c);
                }
                if !s.and_constraint(&a.invariants[e.dst], resolve) || s.is_empty() {
                    continue;
                }
                if next
                    .iter()
                    .any(|t| t.location == e.dst && t.zone.includes(&s))
                {
                    continue;
                }
                next.retain(|t| !(t.location == e.dst && s.includes(&t.zone)));
                next.push(SymbolicState { location: e.dst, zone: s });
            }
        }
        self.states = next;
        !self.states.is_empty()
    }
}

/// Result of replaying a timed word: the symbolic states after the word (or
/// after the failing prefix) and how many events were consumed.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub states: Vec<SymbolicState>,
    pub consumed: usize,
    pub accepted: bool,
}

/// Replays `w` with only silent edges free.  Every named event of the word,
/// observable or not, must be matched by an edge.
pub fn concrete_run(a: &TimedAutomaton, w: &TimedWord) -> Result<RunOutcome> {
    let mut runner = SymbolicRunner::new(a, |l: &Label| l.is_silent());
    for (i, ev) in w.events.iter().enumerate() {
        runner.advance(w.delays[i])?;
        if !runner.observe(ev) {
            return Ok(RunOutcome {
                states: Vec::new(),
                consumed: i,
                accepted: false,
            });
        }
    }
    runner.advance(*w.delays.last().expect("delays is nonempty"))?;
    let accepted = !runner.is_empty();
    Ok(RunOutcome { states: runner.states.clone(), consumed: w.events.len(), accepted })
}
