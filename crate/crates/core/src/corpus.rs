//! Seeded random model generators used to cross-check the decision
//! procedures against the enumerative oracles.
//!
//! Both generators draw from a caller-supplied [`Rng`] so that a fixed seed
//! reproduces the exact same corpus.  [`random_fa`] keeps the plant live
//! (no deadlocking locations) and rejection-samples until the unobservable
//! part of the edge relation is acyclic, so every infinite run stays
//! observably live; [`random_bounded_ta`] puts a clock upper bound on every
//! location so time progress is bounded everywhere.

use std::collections::BTreeSet;

use petgraph::algo::is_cyclic_directed;
use petgraph::graph::DiGraph;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::alphabet::{EventAlphabet, Label};
use crate::fa::{FaEdge, FiniteAutomaton};
use crate::timed::constraint::{ClockConstraint, Relation};
use crate::timed::ta::{TaEdge, TimedAutomaton};

/// Deterministic stream cipher RNG for a given seed.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

const SAMPLE_CAP: usize = 10_000;

/// Random finite automaton with at most six locations and three events
/// (fault included), always containing at least one fault edge and at least
/// one outgoing edge per location.  Candidates whose unobservable edges form
/// a cycle are discarded and redrawn.
pub fn random_fa(rng: &mut impl Rng) -> FiniteAutomaton {
    for _ in 0..SAMPLE_CAP {
        let candidate = draw_fa(rng);
        if !has_unobservable_cycle(&candidate) {
            return candidate;
        }
    }
    panic!("rejection sampling failed to produce an observably live automaton");
}

fn draw_fa(rng: &mut impl Rng) -> FiniteAutomaton {
    let n = rng.gen_range(2..=6);
    let locations: Vec<String> = (0..n).map(|i| format!("l{i}")).collect();

    let two_observables = rng.gen_bool(0.5);
    let observable: Vec<String> = if two_observables {
        vec!["a".into(), "b".into()]
    } else {
        vec!["a".into()]
    };
    // A second unobservable event fits the three-event budget only when a
    // single observable was drawn.
    let quiet_extra = !two_observables && rng.gen_bool(0.5);
    let unobservable: Vec<String> = if quiet_extra {
        vec!["u".into(), "f".into()]
    } else {
        vec!["f".into()]
    };
    let alphabet = EventAlphabet::new(observable, unobservable, Some("f".into()))
        .expect("fixed names form a valid alphabet");

    // Observable labels are drawn three times as often as unobservable ones.
    let mut pool: Vec<Label> = Vec::new();
    for ev in &alphabet.observable {
        pool.extend(std::iter::repeat(Label::event(ev)).take(3));
    }
    for ev in &alphabet.unobservable {
        pool.push(Label::event(ev));
    }

    let want = rng.gen_range(n..=3 * n);
    let mut edges: Vec<FaEdge> = (0..want)
        .map(|_| FaEdge {
            src: rng.gen_range(0..n),
            label: pool[rng.gen_range(0..pool.len())].clone(),
            dst: rng.gen_range(0..n),
        })
        .collect();
    if !edges.iter().any(|e| alphabet.is_fault(&e.label)) {
        edges.push(FaEdge {
            src: rng.gen_range(0..n),
            label: Label::event("f"),
            dst: rng.gen_range(0..n),
        });
    }
    // Keep the plant live: a deadlocking location would let the observer
    // conclude things no infinite behaviour backs up.
    for loc in 0..n {
        if !edges.iter().any(|e| e.src == loc) {
            edges.push(FaEdge {
                src: loc,
                label: pool[rng.gen_range(0..pool.len())].clone(),
                dst: rng.gen_range(0..n),
            });
        }
    }

    FiniteAutomaton {
        locations,
        initial: 0,
        alphabet,
        edges,
        final_states: BTreeSet::new(),
        repeated: BTreeSet::new(),
    }
}

fn has_unobservable_cycle(a: &FiniteAutomaton) -> bool {
    let mut g: DiGraph<(), ()> = DiGraph::new();
    let nodes: Vec<_> = a.locations.iter().map(|_| g.add_node(())).collect();
    for e in &a.edges {
        if !a.alphabet.label_observable(&e.label) {
            g.add_edge(nodes[e.src], nodes[e.dst], ());
        }
    }
    is_cyclic_directed(&g)
}

/// Random timed automaton with at most four locations, two clocks and
/// constants up to four.  Every location gets a clock upper bound, the
/// alphabet is a single observable event and no fault, so the result is
/// directly usable as input to a reachability embedding.
pub fn random_bounded_ta(rng: &mut impl Rng) -> TimedAutomaton {
    let n = rng.gen_range(2..=4);
    let locations: Vec<String> = (0..n).map(|i| format!("l{i}")).collect();
    let clock_count = rng.gen_range(1..=2);
    let clocks: Vec<String> = ["x", "y"][..clock_count]
        .iter()
        .map(|c| c.to_string())
        .collect();
    let alphabet = EventAlphabet::new(vec!["a".into()], Vec::new(), None)
        .expect("fixed names form a valid alphabet");

    let invariants: Vec<ClockConstraint> = (0..n)
        .map(|_| {
            let clock = &clocks[rng.gen_range(0..clock_count)];
            // A strict bound of zero would empty the location outright.
            if rng.gen_bool(0.3) {
                ClockConstraint::single(clock, Relation::Lt, rng.gen_range(1..=4))
            } else {
                ClockConstraint::single(clock, Relation::Le, rng.gen_range(1..=4))
            }
        })
        .collect();

    let relations = [
        Relation::Lt,
        Relation::Le,
        Relation::Eq,
        Relation::Ge,
        Relation::Gt,
    ];
    let want = rng.gen_range(n..=2 * n + 2);
    let edges: Vec<TaEdge> = (0..want)
        .map(|_| {
            let mut guard = ClockConstraint::truth();
            for _ in 0..rng.gen_range(0..=2) {
                let clock = &clocks[rng.gen_range(0..clock_count)];
                let rel = relations[rng.gen_range(0..relations.len())];
                guard = guard.and(&ClockConstraint::single(clock, rel, rng.gen_range(0..=4)));
            }
            let label = if rng.gen_bool(1.0 / 3.0) {
                Label::Silent
            } else {
                Label::event("a")
            };
            let resets: BTreeSet<usize> =
                (0..clock_count).filter(|_| rng.gen_bool(0.4)).collect();
            TaEdge {
                src: rng.gen_range(0..n),
                guard,
                label,
                resets,
                dst: rng.gen_range(0..n),
            }
        })
        .collect();

    TimedAutomaton {
        locations,
        initial: 0,
        clocks,
        alphabet,
        edges,
        invariants,
        final_states: BTreeSet::new(),
        repeated: BTreeSet::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_reproduces_the_same_models() {
        let a: Vec<_> = {
            let mut rng = rng_from_seed(7);
            (0..20).map(|_| random_fa(&mut rng)).collect()
        };
        let b: Vec<_> = {
            let mut rng = rng_from_seed(7);
            (0..20).map(|_| random_fa(&mut rng)).collect()
        };
        assert_eq!(a, b);

        let c: Vec<_> = {
            let mut rng = rng_from_seed(7);
            (0..20).map(|_| random_bounded_ta(&mut rng)).collect()
        };
        let d: Vec<_> = {
            let mut rng = rng_from_seed(7);
            (0..20).map(|_| random_bounded_ta(&mut rng)).collect()
        };
        assert_eq!(c, d);
    }

    #[test]
    fn generated_fa_stay_inside_the_advertised_bounds() {
        let mut rng = rng_from_seed(11);
        for _ in 0..200 {
            let a = random_fa(&mut rng);
            assert!(a.locations.len() <= 6);
            assert!(a.alphabet.observable.len() + a.alphabet.unobservable.len() <= 3);
            assert!(a.edges.iter().any(|e| a.alphabet.is_fault(&e.label)));
            assert!(!has_unobservable_cycle(&a));
            for loc in 0..a.locations.len() {
                assert!(a.edges.iter().any(|e| e.src == loc), "dead location {loc}");
            }
        }
    }

    #[test]
    fn generated_ta_are_bounded_and_fault_free() {
        let mut rng = rng_from_seed(13);
        for _ in 0..100 {
            let a = random_bounded_ta(&mut rng);
            assert!(a.locations.len() <= 4);
            assert!(a.clocks.len() <= 2);
            assert!(a.alphabet.fault.is_none());
            for inv in &a.invariants {
                assert!(inv.atoms.iter().any(|at| at.rel.is_upper()));
            }
            let all_consts = a
                .edges
                .iter()
                .flat_map(|e| e.guard.atoms.iter())
                .chain(a.invariants.iter().flat_map(|i| i.atoms.iter()))
                .map(|at| at.constant);
            assert!(all_consts.max().unwrap_or(0) <= 4);
        }
    }
}
