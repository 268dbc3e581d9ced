//! Bounded-anticipation predictability of finite automata.
//!
//! The decision rests on a confusion check between two views of the system:
//! one that accepts observations of fault-free runs ending within `k` steps
//! of a fault, and one that accepts observations of fault-free runs that can
//! still continue forever without one.  The system is `k`-predictable
//! exactly when no observation is accepted by both, which a reachability
//! query on their synchronized product decides.

use std::collections::BTreeSet;
use std::collections::HashMap;
use std::collections::VecDeque;

use serde::Serialize;

use crate::error::Result;
use crate::fa::{
    backward_distance_df, fa_product_full, hide_unobservable, Dist, FaProduct, FiniteAutomaton,
    UntimedWord,
};

/// Largest usable anticipation bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxBound {
    /// The fault can never occur, so every bound works.
    Infinite,
    /// Largest `k` for which the system is `k`-predictable.
    Value(u32),
    /// Not predictable for any bound, including 0.
    NotPredictable,
}

/// Counterexample to `k`-predictability: a fault-free run that gets within
/// `k` steps of the fault, and a lasso-shaped fault-free run that looks the
/// same to the observer and can run forever.
#[derive(Debug, Clone, Serialize)]
pub struct FaWitness {
    pub prefaulty: UntimedWord,
    pub stem: UntimedWord,
    pub cycle: UntimedWord,
    /// Product locations along the confusion path, for diagnostics.
    pub via: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FaVerdict {
    pub predictable: bool,
    pub bound_checked: u32,
    pub witness: Option<FaWitness>,
}

/// Minimum number of steps from the initial location to a location with an
/// outgoing fault edge; `Infinite` when faults are unreachable.
pub fn kappa_fa(a: &FiniteAutomaton) -> Dist {
    backward_distance_df(a)[a.initial]
}

/// Locations within `k` fault-free steps of enabling the fault.
pub fn compute_fk(a: &FiniteAutomaton, k: u32) -> BTreeSet<usize> {
    backward_distance_df(a)
        .iter()
        .enumerate()
        .filter(|(_, d)| d.steps().is_some_and(|s| s <= k))
        .map(|(q, _)| q)
        .collect()
}

/// Locations that lie on some infinite fault-free run from the initial
/// location.  Computed as the greatest set closed under "has a non-fault
/// successor inside the set", then restricted to the part reachable from the
/// initial location without fault edges.  Every state of an infinite
/// fault-free run belongs to the set, so the restriction is exact.
pub fn compute_f_not_f(a: &FiniteAutomaton) -> BTreeSet<usize> {
    let mut keep: BTreeSet<usize> = (0..a.locations.len()).collect();
    loop {
        let next: BTreeSet<usize> = keep
            .iter()
            .copied()
            .filter(|&q| {
                a.edges
                    .iter()
                    .any(|e| e.src == q && !a.alphabet.is_fault(&e.label) && keep.contains(&e.dst))
            })
            .collect();
        if next == keep {
            break;
        }
        keep = next;
    }
    if !keep.contains(&a.initial) {
        return BTreeSet::new();
    }
    let mut reach = BTreeSet::from([a.initial]);
    let mut queue = VecDeque::from([a.initial]);
    while let Some(q) = queue.pop_front() {
        for e in &a.edges {
            if e.src == q
                && !a.alphabet.is_fault(&e.label)
                && keep.contains(&e.dst)
                && !reach.contains(&e.dst)
            {
                reach.insert(e.dst);
                queue.push_back(e.dst);
            }
        }
    }
    reach
}

/// The two sides of the confusion check.  `*_src` keep the original event
/// labels for witness reconstruction; the hidden copies drive the product.
pub struct TwinFa {
    pub a1: FiniteAutomaton,
    pub a1_src: FiniteAutomaton,
    pub a2: FiniteAutomaton,
    pub a2_src: FiniteAutomaton,
    /// False when no infinite fault-free run exists at all: `a2` is then a
    /// placeholder with an empty language.
    pub a2_live: bool,
}

/// Builds the two product operands for bound `k`.
///
/// Side one is the fault-free part of the automaton that can still reach a
/// fault (unreachable-from-fault locations contribute nothing and are
/// dropped), accepting at locations within `k` steps of enabling it.  Side
/// two is the restriction to locations on infinite fault-free runs, every
/// location accepting.
pub fn build_twin_fa(a: &FiniteAutomaton, k: u32) -> TwinFa {
    let dist = backward_distance_df(a);
    let fk = compute_fk(a, k);

    let base = a.without_fault_edges();
    let keep1: Vec<usize> = (0..a.locations.len())
        .filter(|&q| dist[q].is_finite() || q == a.initial)
        .collect();
    let mut a1_src = base.restrict_to(&keep1).prune_unreachable();
    a1_src.final_states = fk
        .iter()
        .filter_map(|&q| a1_src.location_index(&a.locations[q]))
        .collect();
    a1_src.repeated = BTreeSet::new();
    let a1 = hide_unobservable(&a1_src);

    let fnf = compute_f_not_f(a);
    let a2_live = fnf.contains(&a.initial);
    let mut a2_src = if a2_live {
        let keep2: Vec<usize> = (0..a.locations.len()).filter(|q| fnf.contains(q)).collect();
        let mut t = base.restrict_to(&keep2);
        t.final_states = (0..t.locations.len()).collect();
        t
    } else {
        FiniteAutomaton {
            locations: vec![a.locations[a.initial].clone()],
            initial: 0,
            alphabet: a.alphabet.clone(),
            edges: Vec::new(),
            final_states: BTreeSet::new(),
            repeated: BTreeSet::new(),
        }
    };
    a2_src.repeated = a2_src.final_states.clone();
    let a2 = hide_unobservable(&a2_src);

    TwinFa { a1, a1_src, a2, a2_src, a2_live }
}

/// Decides `k`-predictability and produces a replayable counterexample when
/// the answer is negative.
pub fn check_k_predictable(a: &FiniteAutomaton, k: u32) -> Result<FaVerdict> {
    if !kappa_fa(a).is_finite() {
        return Ok(FaVerdict { predictable: true, bound_checked: k, witness: None });
    }
    let twin = build_twin_fa(a, k);
    let FaProduct { fa: prod, pairs, edge_src } = fa_product_full(&twin.a1, &twin.a2)?;

    let hit = |s: usize| {
        let (s1, s2) = pairs[s];
        twin.a1.final_states.contains(&s1) && twin.a2.final_states.contains(&s2)
    };

    // breadth-first search with parent pointers, edges in declaration order
    let mut parent: Vec<Option<(usize, usize)>> = vec![None; prod.locations.len()];
    let mut seen = vec![false; prod.locations.len()];
    seen[prod.initial] = true;
    let mut queue = VecDeque::from([prod.initial]);
    let mut target = if hit(prod.initial) { Some(prod.initial) } else { None };
    while target.is_none() {
        let Some(q) = queue.pop_front() else { break };
        for (ei, e) in prod.edges.iter().enumerate().filter(|(_, e)| e.src == q) {
            if !seen[e.dst] {
                seen[e.dst] = true;
                parent[e.dst] = Some((q, ei));
                if hit(e.dst) {
                    target = Some(e.dst);
                    break;
                }
                queue.push_back(e.dst);
            }
        }
    }

    let Some(end) = target else {
        return Ok(FaVerdict { predictable: true, bound_checked: k, witness: None });
    };

    let mut path_edges = Vec::new();
    let mut via = vec![prod.locations[end].clone()];
    let mut cur = end;
    while let Some((p, ei)) = parent[cur] {
        path_edges.push(ei);
        via.push(prod.locations[p].clone());
        cur = p;
    }
    path_edges.reverse();
    via.reverse();

    let mut pre_events = Vec::new();
    let mut pre_steps = 0usize;
    let mut stem_events = Vec::new();
    let mut stem_steps = 0usize;
    for &ei in &path_edges {
        let (ia, ib) = edge_src[ei];
        if let Some(ia) = ia {
            pre_steps += 1;
            if let Some(name) = twin.a1_src.edges[ia].label.name() {
                pre_events.push(name.to_string());
            }
        }
        if let Some(ib) = ib {
            stem_steps += 1;
            if let Some(name) = twin.a2_src.edges[ib].label.name() {
                stem_events.push(name.to_string());
            }
        }
    }

    // close the second side into a lasso: walk from the end of the stem
    // until a location repeats (possible because every side-two location
    // keeps a fault-free successor)
    let (_, mut s2) = pairs[end];
    let mut visited = vec![s2];
    let mut walk_edges = Vec::new();
    let cycle_at = loop {
        let e = twin
            .a2_src
            .edges
            .iter()
            .find(|e| e.src == s2)
            .expect("side-two locations always have a successor");
        walk_edges.push(e);
        s2 = e.dst;
        if let Some(pos) = visited.iter().position(|&v| v == s2) {
            break pos;
        }
        visited.push(s2);
    };
    let mut cycle_events = Vec::new();
    let mut cycle_steps = 0usize;
    for (i, e) in walk_edges.iter().enumerate() {
        let into_cycle = i >= cycle_at;
        let bucket_events = if into_cycle { &mut cycle_events } else { &mut stem_events };
        if let Some(name) = e.label.name() {
            bucket_events.push(name.to_string());
        }
        if into_cycle {
            cycle_steps += 1;
        } else {
            stem_steps += 1;
        }
    }

    Ok(FaVerdict {
        predictable: false,
        bound_checked: k,
        witness: Some(FaWitness {
            prefaulty: UntimedWord::new(pre_events, pre_steps),
            stem: UntimedWord::new(stem_events, stem_steps),
            cycle: UntimedWord::new(cycle_events, cycle_steps),
            via,
        }),
    })
}

/// Largest `k` for which the system is `k`-predictable.
///
/// The product at bound 0 already contains every confusion: a pair reached
/// there with side one at distance `d` from the fault defeats every bound
/// `>= d`, so the answer is one less than the smallest such distance.
pub fn max_k(a: &FiniteAutomaton) -> Result<MaxBound> {
    let dist = backward_distance_df(a);
    let kappa = match dist[a.initial] {
        Dist::Infinite => return Ok(MaxBound::Infinite),
        Dist::Steps(s) => s,
    };
    let by_name: HashMap<&str, u32> = a
        .locations
        .iter()
        .enumerate()
        .filter_map(|(q, name)| dist[q].steps().map(|s| (name.as_str(), s)))
        .collect();

    let twin = build_twin_fa(a, 0);
    let FaProduct { fa: prod, pairs, .. } = fa_product_full(&twin.a1, &twin.a2)?;
    let mut min_d: Option<u32> = None;
    let mut seen = vec![false; prod.locations.len()];
    seen[prod.initial] = true;
    let mut queue = VecDeque::from([prod.initial]);
    while let Some(q) = queue.pop_front() {
        let (s1, s2) = pairs[q];
        if twin.a2.final_states.contains(&s2) {
            let d = by_name
                .get(twin.a1.location_name(s1))
                .copied()
                .expect("side-one locations reach the fault by construction");
            min_d = Some(min_d.map_or(d, |m| m.min(d)));
        }
        for e in prod.edges.iter().filter(|e| e.src == q) {
            if !seen[e.dst] {
                seen[e.dst] = true;
                queue.push_back(e.dst);
            }
        }
    }
    Ok(match min_d {
        None => MaxBound::Value(kappa),
        Some(0) => MaxBound::NotPredictable,
        Some(m) => MaxBound::Value(m - 1),
    })
}

/// Plain predictability: some bound works, equivalently bound 0 works.
pub fn predictable_fa(a: &FiniteAutomaton) -> Result<bool> {
    Ok(check_k_predictable(a, 0)?.predictable)
}
