//! Forward symbolic reachability and minimal-duration queries.
//!
//! Zones are kept delay-closed under location invariants and extrapolated by
//! the per-clock maximal constants, so exploration terminates and stays
//! exact for guard/location reachability questions.

use std::collections::VecDeque;

use crate::error::Result;
use crate::timed::constraint::{ClockConstraint, Relation};
use crate::timed::region::region_graph;
use crate::timed::ta::TimedAutomaton;
use crate::timed::zone::Zone;

/// Explores the reachable symbolic states of `a` breadth-first, with
/// inclusion subsumption per location.  Returned zones are delay-closed and
/// invariant-constrained, in discovery order.
pub fn forward_reach(a: &TimedAutomaton) -> Vec<(usize, Zone)> {
    let resolve = |name: &str| a.clock_index(name);
    let max: Vec<Option<i64>> =
        a.max_constants().iter().map(|&c| Some(c as i64)).collect();

    let mut z0 = Zone::zero(a.clocks.len());
    z0.and_constraint(&a.invariants[a.initial], resolve);
    z0.up();
    z0.and_constraint(&a.invariants[a.initial], resolve);
    z0.extrapolate(&max);

    let mut passed: Vec<Vec<Zone>> = vec![Vec::new(); a.locations.len()];
    let mut explored: Vec<(usize, Zone)> = Vec::new();
    let mut waiting = VecDeque::new();
    if !z0.is_empty() {
        waiting.push_back((a.initial, z0));
    }
    while let Some((loc, z)) = waiting.pop_front() {
        if passed[loc].iter().any(|p| p.includes(&z)) {
            continue;
        }
        passed[loc].retain(|p| !z.includes(p));
        passed[loc].push(z.clone());
        explored.push((loc, z.clone()));
        for e in a.edges.iter().filter(|e| e.src == loc) {
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
            s.up();
            s.and_constraint(&a.invariants[e.dst], resolve);
            s.extrapolate(&max);
            if !s.is_empty() {
                waiting.push_back((e.dst, s));
            }
        }
    }
    explored
}

/// Whether a fault edge can fire at most `bound` time units after start.
/// Decided by adding a never-reset reference clock bounded by `bound`.
pub fn fault_within(a: &TimedAutomaton, bound: u64) -> bool {
    let mut b = a.clone();
    let t = b.fresh_clock("t");
    b.clocks.push(t.clone());
    for inv in &mut b.invariants {
        *inv = inv.and(&ClockConstraint::single(&t, Relation::Le, bound));
    }
    let resolve = |name: &str| b.clock_index(name);
    for (loc, z) in forward_reach(&b) {
        for e in b.edges.iter().filter(|e| e.src == loc && b.is_fault_edge(e)) {
            let mut s = z.clone();
            if s.and_constraint(&e.guard, resolve) && !s.is_empty() {
                return true;
            }
        }
    }
    false
}

/// Least integer bound within which a fault can occur, or `None` when no
/// fault is reachable at all.  The search space is capped by the size of the
/// region graph times the largest constant, which bounds the duration of any
/// shortest witness run.
pub fn min_time_to_fault(a: &TimedAutomaton) -> Result<Option<u64>> {
    if !a.edges.iter().any(|e| a.is_fault_edge(e)) {
        return Ok(None);
    }
    let regions = region_graph(a)?;
    let c = a.max_constants().into_iter().max().unwrap_or(0);
    let cap = regions.nodes.len() as u64 * (c + 1);
    if !fault_within(a, cap) {
        return Ok(None);
    }
    let (mut lo, mut hi) = (0u64, cap);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if fault_within(a, mid) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(Some(lo))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{load_model, Model};

    fn bundled(name: &str) -> TimedAutomaton {
        let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
            .join("../../models")
            .join(name);
        match load_model(&path).unwrap() {
            Model::Ta(a) => a,
            Model::Fa(_) => panic!("expected a timed model"),
        }
    }

    #[test]
    fn earliest_fault_instants_of_bundled_models() {
        assert_eq!(min_time_to_fault(&bundled("g_timed.json")).unwrap(), Some(5));
        assert_eq!(min_time_to_fault(&bundled("b.json")).unwrap(), Some(6));
    }

    #[test]
    fn no_fault_edges_means_unbounded() {
        let a = bundled("g_timed.json").without_fault_edges();
        assert_eq!(min_time_to_fault(&a).unwrap(), None);
    }

    #[test]
    fn fault_within_is_monotone_on_bundled_model() {
        let a = bundled("b.json");
        assert!(!fault_within(&a, 5));
        assert!(fault_within(&a, 6));
        assert!(fault_within(&a, 7));
    }

    #[test]
    fn forward_reach_respects_invariants() {
        let a = bundled("b.json");
        let states = forward_reach(&a);
        // l1 is reachable only through the silent edge; the sink needs f
        let l1 = a.location_index("l1").unwrap();
        let sink = a.location_index("sink").unwrap();
        assert!(states.iter().any(|(l, _)| *l == l1));
        assert!(states.iter().any(|(l, _)| *l == sink));
        let x = a.clock_index("x").unwrap();
        for (l, z) in &states {
            if *l == l1 {
                // invariant x <= 1 must hold in every stored zone
                let mut s = z.clone();
                s.and_rational(x, Relation::Gt, crate::timed::ta::rational(1, 1));
                assert!(s.is_empty());
            }
        }
    }
}
