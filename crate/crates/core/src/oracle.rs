//! Brute-force reference semantics for the untimed checks, plus witness
//! replay.  Everything here is written against the language definitions
//! directly — subset exploration over projected words — and deliberately
//! shares no construction with the decision engines, so the test suites can
//! diff the two.  Capped to small automata; not a performance path.

use std::collections::{BTreeSet, VecDeque};

use petgraph::graph::DiGraph;

use crate::alphabet::Label;
use crate::error::{Error, Result};
use crate::fa::{FiniteAutomaton, UntimedWord};
use crate::ta_predict::{normalize, SamplingSpec, TaWitness};
use crate::timed::run::{concrete_run, SymbolicRunner};
use crate::timed::ta::{Rational, TimedAutomaton};
use crate::timed::zone::Zone;

const ORACLE_LOCATION_CAP: usize = 10;

fn cap_check(a: &FiniteAutomaton) -> Result<()> {
    if a.locations.len() > ORACLE_LOCATION_CAP {
        return Err(Error::input(format!(
            "oracle refuses automata with more than {ORACLE_LOCATION_CAP} locations"
        )));
    }
    Ok(())
}

/// Per-location least number of non-fault steps to reach a location with an
/// outgoing fault edge, by an independent forward search from each location.
fn steps_to_fault(a: &FiniteAutomaton) -> Vec<Option<usize>> {
    let enabled: BTreeSet<usize> = a
        .edges
        .iter()
        .filter(|e| a.alphabet.is_fault(&e.label))
        .map(|e| e.src)
        .collect();
    (0..a.locations.len())
        .map(|start| {
            let mut dist = vec![None; a.locations.len()];
            dist[start] = Some(0usize);
            let mut queue = VecDeque::from([start]);
            while let Some(q) = queue.pop_front() {
                if enabled.contains(&q) {
                    return dist[q];
                }
                for e in &a.edges {
                    if e.src == q && !a.alphabet.is_fault(&e.label) && dist[e.dst].is_none() {
                        dist[e.dst] = Some(dist[q].unwrap() + 1);
                        queue.push_back(e.dst);
                    }
                }
            }
            None
        })
        .collect()
}

/// Locations from which some infinite run avoiding fault edges exists:
/// exactly those that can reach a cycle of the fault-free subgraph.
fn has_infinite_faultfree(a: &FiniteAutomaton) -> Vec<bool> {
    let mut g = DiGraph::<(), ()>::new();
    let nodes: Vec<_> = (0..a.locations.len()).map(|_| g.add_node(())).collect();
    for e in &a.edges {
        if !a.alphabet.is_fault(&e.label) {
            g.add_edge(nodes[e.src], nodes[e.dst], ());
        }
    }
    let mut live = vec![false; a.locations.len()];
    for scc in petgraph::algo::tarjan_scc(&g) {
        let cyclic = scc.len() > 1
            || g.edges(scc[0]).any(|ed| petgraph::visit::EdgeRef::target(&ed) == scc[0]);
        if cyclic {
            for n in scc {
                live[n.index()] = true;
            }
        }
    }
    // backward closure: anything that reaches a live location is live
    let mut changed = true;
    while changed {
        changed = false;
        for e in &a.edges {
            if !a.alphabet.is_fault(&e.label) && live[e.dst] && !live[e.src] {
                live[e.src] = true;
                changed = true;
            }
        }
    }
    live
}

/// Closes a location set under fault-free moves invisible to the observer
/// (silent edges and unobservable events).
fn unobservable_closure(a: &FiniteAutomaton, set: &BTreeSet<usize>) -> BTreeSet<usize> {
    let mut out = set.clone();
    let mut queue: VecDeque<usize> = out.iter().copied().collect();
    while let Some(q) = queue.pop_front() {
        for e in &a.edges {
            if e.src == q
                && !a.alphabet.is_fault(&e.label)
                && !a.alphabet.label_observable(&e.label)
                && !out.contains(&e.dst)
            {
                out.insert(e.dst);
                queue.push_back(e.dst);
            }
        }
    }
    out
}

fn observable_step(
    a: &FiniteAutomaton,
    set: &BTreeSet<usize>,
    event: &str,
) -> BTreeSet<usize> {
    let moved: BTreeSet<usize> = a
        .edges
        .iter()
        .filter(|e| set.contains(&e.src) && e.label == Label::event(event))
        .map(|e| e.dst)
        .collect();
    unobservable_closure(a, &moved)
}

/// Every location set the observer can believe in after some projected word
/// of a fault-free run, discovered breadth-first.  The search is exact: the
/// number of distinct belief sets is finite, so memoisation replaces any
/// explicit word-length bound.
fn belief_sets(a: &FiniteAutomaton) -> Vec<BTreeSet<usize>> {
    let init = unobservable_closure(a, &BTreeSet::from([a.initial]));
    let mut seen = vec![init.clone()];
    let mut queue = VecDeque::from([init]);
    while let Some(set) = queue.pop_front() {
        for ev in &a.alphabet.observable {
            if a.alphabet.fault.as_deref() == Some(ev.as_str()) {
                continue; // fault-free runs never contain the fault, observable or not
            }
            let next = observable_step(a, &set, ev);
            if !next.is_empty() && !seen.contains(&next) {
                seen.push(next.clone());
                queue.push_back(next);
            }
        }
    }
    seen
}

/// Bounded-anticipation predictability decided from the language definition:
/// the system is *not* predictable at `k` iff some projected word is
/// explainable both by a fault-free run ending within `k` steps of a fault
/// and by a fault-free run that can still run forever without one.
pub fn fa_oracle_k_predictable(a: &FiniteAutomaton, k: usize) -> Result<bool> {
    cap_check(a)?;
    let dist = steps_to_fault(a);
    let close = |q: usize| dist[q].is_some_and(|d| d <= k);
    let live = has_infinite_faultfree(a);
    for set in belief_sets(a) {
        if set.iter().any(|&q| close(q)) && set.iter().any(|&q| live[q]) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// For each location, whether some fault-free run from it carries at least
/// `n` events (silent steps not counted).  Exact: a reachable fault-free
/// cycle containing an event gives unbounded counts; otherwise the count is
/// a longest-path computation on the condensation.
fn long_faultfree_continuation(a: &FiniteAutomaton, n: usize) -> Vec<bool> {
    let m = a.locations.len();
    let mut g = DiGraph::<(), bool>::new();
    let nodes: Vec<_> = (0..m).map(|_| g.add_node(())).collect();
    for e in &a.edges {
        if !a.alphabet.is_fault(&e.label) {
            g.add_edge(nodes[e.src], nodes[e.dst], !e.label.is_silent());
        }
    }
    let sccs = petgraph::algo::tarjan_scc(&g);
    let mut comp = vec![0usize; m];
    for (ci, scc) in sccs.iter().enumerate() {
        for node in scc {
            comp[node.index()] = ci;
        }
    }
    // each component's best count; None encodes unbounded.  An event edge
    // inside a cyclic component sits on a cycle, so it can be pumped.
    let mut best: Vec<Option<usize>> = vec![Some(0); sccs.len()];
    for e in &a.edges {
        if !a.alphabet.is_fault(&e.label)
            && !e.label.is_silent()
            && comp[e.src] == comp[e.dst]
            && (sccs[comp[e.src]].len() > 1 || e.src == e.dst)
        {
            best[comp[e.src]] = None;
        }
    }
    // tarjan_scc returns components in reverse topological order, so
    // successors of a component appear before it in `sccs`.
    for (ci, _) in sccs.iter().enumerate() {
        if best[ci].is_none() {
            continue;
        }
        for e in &a.edges {
            if a.alphabet.is_fault(&e.label) || comp[e.src] != ci || comp[e.dst] == ci {
                continue;
            }
            let step = usize::from(!e.label.is_silent());
            match best[comp[e.dst]] {
                None => best[ci] = None,
                Some(v) => {
                    if best[ci].is_some_and(|b| b < v + step) {
                        best[ci] = Some(v + step);
                    }
                }
            }
            if best[ci].is_none() {
                break;
            }
        }
    }
    (0..m)
        .map(|q| match best[comp[q]] {
            None => true,
            Some(v) => v >= n,
        })
        .collect()
}

/// The original quantifier-based notion of predictability, evaluated
/// literally: there must be a horizon `n` such that every word one step
/// short of a fault has a prefix whose every observational look-alike has
/// only short fault-free continuations (shorter than `n` events).
///
/// Non-predictability is therefore a fault-free path to a fault-enabled
/// location along which *every* prefix still has a look-alike with a long
/// fault-free future; that path predicate is memoised on (location, belief
/// set) pairs, which is exhaustive because both components are finite.
pub fn gl_oracle(a: &FiniteAutomaton) -> Result<bool> {
    cap_check(a)?;
    let dist = steps_to_fault(a);
    let reach_fault = (0..a.locations.len()).filter(|&q| dist[q].is_some()).count();
    let live = has_infinite_faultfree(a);
    let live_count = live.iter().filter(|&&b| b).count();
    let n = reach_fault.max(1) * live_count.max(1);
    let long = long_faultfree_continuation(a, n);
    let bad = |set: &BTreeSet<usize>| set.iter().any(|&q| long[q]);

    let enabled: BTreeSet<usize> = a
        .edges
        .iter()
        .filter(|e| a.alphabet.is_fault(&e.label))
        .map(|e| e.src)
        .collect();

    let init_belief = unobservable_closure(a, &BTreeSet::from([a.initial]));
    if !bad(&init_belief) {
        return Ok(true); // the empty prefix already satisfies the predictor
    }
    let mut seen: BTreeSet<(usize, Vec<usize>)> = BTreeSet::new();
    let mut queue = VecDeque::from([(a.initial, init_belief)]);
    while let Some((q, belief)) = queue.pop_front() {
        let key = (q, belief.iter().copied().collect::<Vec<_>>());
        if !seen.insert(key) {
            continue;
        }
        if enabled.contains(&q) {
            return Ok(false);
        }
        for e in a.edges.iter().filter(|e| e.src == q) {
            if a.alphabet.is_fault(&e.label) {
                continue;
            }
            let next_belief = match &e.label {
                l if a.alphabet.label_observable(l) => {
                    observable_step(a, &belief, l.name().unwrap())
                }
                _ => belief.clone(),
            };
            if bad(&next_belief) {
                queue.push_back((e.dst, next_belief));
            }
        }
    }
    Ok(true)
}

/// All locations reachable from `from` by reading exactly `events` (silent
/// model edges interleave freely); fault edges excluded.
fn replay_sets(
    a: &FiniteAutomaton,
    from: &BTreeSet<usize>,
    events: &[String],
) -> BTreeSet<usize> {
    let silent_close = |set: &BTreeSet<usize>| {
        let mut out = set.clone();
        let mut queue: VecDeque<usize> = out.iter().copied().collect();
        while let Some(q) = queue.pop_front() {
            for e in &a.edges {
                if e.src == q && e.label.is_silent() && !out.contains(&e.dst) {
                    out.insert(e.dst);
                    queue.push_back(e.dst);
                }
            }
        }
        out
    };
    let mut cur = silent_close(from);
    for ev in events {
        let moved: BTreeSet<usize> = a
            .edges
            .iter()
            .filter(|e| {
                cur.contains(&e.src)
                    && e.label == Label::event(ev.as_str())
                    && !a.alphabet.is_fault(&e.label)
            })
            .map(|e| e.dst)
            .collect();
        cur = silent_close(&moved);
        if cur.is_empty() {
            break;
        }
    }
    cur
}

/// Replays an engine-produced non-predictability witness for the untimed
/// check: the prefaulty word must be realizable fault-free into the
/// `k`-close set, the lasso must be realizable fault-free with a repeatable
/// nonempty cycle, and the two observable projections must agree on the
/// prefix they share.
pub fn validate_fa_witness(
    a: &FiniteAutomaton,
    k: usize,
    prefaulty: &UntimedWord,
    stem: &UntimedWord,
    cycle: &UntimedWord,
) -> std::result::Result<(), String> {
    let dist = steps_to_fault(a);

    let ends = replay_sets(a, &BTreeSet::from([a.initial]), &prefaulty.events);
    if !ends.iter().any(|&q| dist[q].is_some_and(|d| d <= k)) {
        return Err(format!(
            "prefaulty word does not reach within {k} steps of a fault (ends in {ends:?})"
        ));
    }

    if cycle.events.is_empty() && cycle.duration == 0 {
        return Err("lasso cycle is empty".into());
    }
    let stem_ends = replay_sets(a, &BTreeSet::from([a.initial]), &stem.events);
    if stem_ends.is_empty() {
        return Err("lasso stem does not replay".into());
    }
    let repeatable = stem_ends.iter().any(|&s| {
        let around = replay_sets(a, &BTreeSet::from([s]), &cycle.events);
        around.contains(&s)
    });
    if !repeatable {
        return Err("lasso cycle does not loop back on any stem endpoint".into());
    }

    let project = |w: &UntimedWord| -> Vec<String> {
        w.events
            .iter()
            .filter(|e| a.alphabet.is_observable(e))
            .cloned()
            .collect()
    };
    let left = project(prefaulty);
    let mut right = project(stem);
    let cyc = project(cycle);
    if cyc.is_empty() && left.len() > right.len() {
        return Err("lasso projection cannot cover the prefaulty projection".into());
    }
    while right.len() < left.len() {
        right.extend(cyc.iter().cloned());
    }
    if right[..left.len()] != left[..] {
        return Err(format!(
            "observable projections diverge: {left:?} vs {:?}",
            &right[..left.len().min(right.len())]
        ));
    }
    Ok(())
}

const REACH_ZONE_CAP: usize = 50_000;

/// Forward zone reachability of the named location, independent of any
/// prediction machinery: explore delay and edge successors with
/// extrapolation until the frontier is exhausted.
pub fn ta_reachable(a: &TimedAutomaton, target: &str) -> Result<bool> {
    let t = a
        .location_index(target)
        .ok_or_else(|| Error::input(format!("unknown location: {target}")))?;
    let resolve = |n: &str| a.clock_index(n);
    let max: Vec<Option<i64>> =
        a.max_constants().iter().map(|&c| Some(c as i64)).collect();
    let mut start = Zone::zero(a.clocks.len());
    if !start.and_constraint(&a.invariants[a.initial], resolve) || start.is_empty() {
        return Ok(false);
    }
    start.up();
    start.and_constraint(&a.invariants[a.initial], resolve);
    start.extrapolate(&max);
    let mut queue: VecDeque<(usize, Zone)> = VecDeque::from([(a.initial, start)]);
    let mut closed: Vec<Vec<Zone>> = vec![Vec::new(); a.locations.len()];
    let mut stored = 0usize;
    while let Some((loc, z)) = queue.pop_front() {
        if loc == t {
            return Ok(true);
        }
        if closed[loc].iter().any(|p| p.includes(&z)) {
            continue;
        }
        closed[loc].retain(|p| !z.includes(p));
        closed[loc].push(z.clone());
        stored += 1;
        if stored > REACH_ZONE_CAP {
            return Err(Error::internal("reachability exploration exceeded the cap"));
        }
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
                queue.push_back((e.dst, s));
            }
        }
    }
    Ok(false)
}

const FLEX_ZONE_CAP: usize = 10_000;

/// Closure of symbolic states under arbitrary delays and non-observable
/// edges, then one step over the edges labelled `name`.  Used to replay the
/// repeating part of a timed witness, whose events carry no timestamps.
fn flex_event(
    a: &TimedAutomaton,
    states: &[(usize, Zone)],
    name: &str,
) -> std::result::Result<Vec<(usize, Zone)>, String> {
    let resolve = |n: &str| a.clock_index(n);
    let max: Vec<Option<i64>> =
        a.max_constants().iter().map(|&c| Some(c as i64)).collect();
    let mut queue: VecDeque<(usize, Zone)> = VecDeque::new();
    for (loc, z) in states {
        let mut z = z.clone();
        z.up();
        z.and_constraint(&a.invariants[*loc], resolve);
        z.extrapolate(&max);
        if !z.is_empty() {
            queue.push_back((*loc, z));
        }
    }
    let mut closed: Vec<Vec<Zone>> = vec![Vec::new(); a.locations.len()];
    let mut stored = 0usize;
    while let Some((loc, z)) = queue.pop_front() {
        if closed[loc].iter().any(|p| p.includes(&z)) {
            continue;
        }
        closed[loc].retain(|p| !z.includes(p));
        closed[loc].push(z.clone());
        stored += 1;
        if stored > FLEX_ZONE_CAP {
            return Err("witness replay exceeded the exploration cap".into());
        }
        for e in a.edges.iter().filter(|e| e.src == loc) {
            let observable = e
                .label
                .name()
                .is_some_and(|n| a.alphabet.is_observable(n));
            if observable {
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
            s.up();
            s.and_constraint(&a.invariants[e.dst], resolve);
            s.extrapolate(&max);
            if !s.is_empty() {
                queue.push_back((e.dst, s));
            }
        }
    }
    let mut out: Vec<(usize, Zone)> = Vec::new();
    for (loc, zones) in closed.iter().enumerate() {
        for z in zones {
            for e in a.edges.iter().filter(|e| e.src == loc) {
                if e.label.name() != Some(name) {
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
                if out.iter().any(|(l, w)| *l == e.dst && w.includes(&s)) {
                    continue;
                }
                out.retain(|(l, w)| !(*l == e.dst && s.includes(w)));
                out.push((e.dst, s));
            }
        }
    }
    Ok(out)
}

/// Replays an engine-produced non-predictability witness for the timed
/// check: the faulty word must replay into the fault sink with its
/// prefaulty part alone fault-free, the fault must fall within the bound of
/// the switch instant (which must sit on the sampling grid, if any), the
/// pre-switch observable projections must agree with exact timestamps, and
/// the observed stream plus two turns of its repeating part must have a
/// fault-free explanation.
pub fn validate_ta_witness(
    a: &TimedAutomaton,
    bound: u64,
    sampling: Option<SamplingSpec>,
    w: &TaWitness,
) -> std::result::Result<(), String> {
    let fault = a
        .alphabet
        .fault
        .clone()
        .ok_or_else(|| "model declares no fault event".to_string())?;
    if w.faulty.events.last().map(String::as_str) != Some(fault.as_str()) {
        return Err("faulty word does not end with the fault event".into());
    }
    if w.faulty.events[..w.faulty.events.len() - 1].contains(&fault) {
        return Err("faulty word fires the fault more than once".into());
    }
    let last_delay = *w.faulty.delays.last().expect("timed words end with a delay");
    if w.faulty.duration() - last_delay != w.fault_time {
        return Err("fault instant disagrees with the faulty word".into());
    }
    if w.switch_time > w.fault_time {
        return Err("switch happens after the fault".into());
    }
    let effective = match sampling {
        Some(s) => Rational::from_integer(bound as i64) * s.period(),
        None => Rational::from_integer(bound as i64),
    };
    if w.fault_time - w.switch_time > effective {
        return Err(format!(
            "anticipation {} exceeds the bound {}",
            w.fault_time - w.switch_time,
            effective
        ));
    }
    if let Some(s) = sampling {
        if !(w.switch_time / s.period()).is_integer() {
            return Err("switch instant is off the sampling grid".into());
        }
    }

    let norm = normalize(a).map_err(|e| e.to_string())?;
    let run = concrete_run(&norm.ta, &w.faulty).map_err(|e| e.to_string())?;
    if !run.accepted {
        return Err(format!(
            "faulty word fails to replay (stuck after {} events)",
            run.consumed
        ));
    }
    if !run.states.iter().all(|s| s.location == norm.sink) {
        return Err("faulty word replay does not end in the fault sink".into());
    }
    let mut prefault = w.faulty.clone();
    prefault.events.pop();
    let tail = prefault.delays.pop().expect("timed words end with a delay");
    *prefault.delays.last_mut().expect("at least one delay remains") += tail;
    let pre_run = concrete_run(a, &prefault).map_err(|e| e.to_string())?;
    if !pre_run.accepted {
        return Err("prefaulty part fails to replay as a run of the model".into());
    }

    // observable projections agree, timestamp for timestamp, strictly
    // before the switch; boundary events may legally fall on either side
    let mut acc = Rational::from_integer(0);
    let mut pre: Vec<(Rational, String)> = Vec::new();
    for (i, ev) in w.faulty.events.iter().enumerate() {
        acc += w.faulty.delays[i];
        if acc < w.switch_time && a.alphabet.is_observable(ev) {
            pre.push((acc, ev.clone()));
        }
    }
    let mut seen: Vec<(Rational, String)> = Vec::new();
    let mut t = Rational::from_integer(0);
    for (i, ev) in w.observed.events.iter().enumerate() {
        t += w.observed.delays[i];
        seen.push((t, ev.clone()));
    }
    if seen.len() < pre.len() || seen[..pre.len()] != pre[..] {
        return Err("observable projections diverge before the switch".into());
    }

    // the observed stream must have a fault-free explanation, which the
    // repeating part keeps alive
    let mut est = a.clone();
    est.edges.retain(|e| !a.alphabet.is_fault(&e.label));
    let free = |l: &Label| match l.name() {
        None => true,
        Some(n) => !a.alphabet.is_observable(n),
    };
    let mut runner = SymbolicRunner::new(&est, free);
    for (i, ev) in w.observed.events.iter().enumerate() {
        runner.advance(w.observed.delays[i]).map_err(|e| e.to_string())?;
        if !runner.observe(ev) {
            return Err(format!(
                "observed word has no fault-free explanation at event {i}"
            ));
        }
    }
    runner
        .advance(*w.observed.delays.last().expect("timed words end with a delay"))
        .map_err(|e| e.to_string())?;
    if runner.is_empty() {
        return Err("observed word has no fault-free explanation".into());
    }
    let mut states: Vec<(usize, Zone)> =
        runner.states().iter().map(|s| (s.location, s.zone.clone())).collect();
    for _ in 0..2 {
        for ev in &w.cycle {
            states = flex_event(&est, &states, ev)?;
            if states.is_empty() {
                return Err(format!("repeating part cannot fire `{ev}` again"));
            }
        }
    }
    Ok(())
}
