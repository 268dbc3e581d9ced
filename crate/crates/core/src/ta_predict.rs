//! Fault anticipation for timed models.
//!
//! The decision compares two symbolic explanations of one observation
//! stream.  The first component guesses, at some instant (the switch), that
//! a fault will fire within the anticipation bound and simulates the rest of
//! that doomed run silently (its shadow copy), echoing any further
//! observations.  The second component tracks a fault-free explanation of
//! the same observations, forever.  The model is predictable at the bound
//! iff the synchronized product has no accepting infinite behaviour, decided
//! on the region graph.
//!
//! Time divergence is demanded by default through a unit-pulse gadget; runs
//! that stop the clock (Zeno) only count when explicitly allowed.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::alphabet::{EventAlphabet, Label};
use crate::error::{Error, Result};
use crate::timed::constraint::{ClockConstraint, Relation};
use crate::timed::reach::min_time_to_fault;
use crate::timed::region::{buchi_lasso, region_graph, Region, RegionEdge, RegionGraph, RegionLasso, RegionMove};
use crate::timed::run::concrete_run;
use crate::timed::ta::{rational, Rational, TaEdge, TimedAutomaton, TimedWord};
use crate::timed::zone_graph::{buchi_lasso_zones, ZoneLasso};

/// Reserved location name every fault edge targets after preparation.
pub const FAULT_SINK: &str = "l_f";
/// Reserved clock reset when entering the fault sink.
pub const FAULT_CLOCK: &str = "x_f";

/// A model with all fault edges redirected into a single absorbing sink
/// that echoes observable events forever.
#[derive(Debug, Clone)]
pub struct NormalizedTa {
    pub ta: TimedAutomaton,
    pub sink: usize,
    pub sink_clock: usize,
}

fn reserved_error() -> Error {
    Error::input(format!(
        "the location name {FAULT_SINK} and clock name {FAULT_CLOCK} are reserved for the fault sink"
    ))
}

/// Redirects every fault edge to a fresh absorbing sink `l_f` which resets a
/// fresh clock `x_f`, carries the invariant `x_f <= 1`, and echoes every
/// observable event (resetting `x_f`).  Idempotent; models that use the
/// reserved names for anything else are rejected.
pub fn normalize(a: &TimedAutomaton) -> Result<NormalizedTa> {
    a.alphabet.require_fault()?;
    if a.location_index(FAULT_SINK).is_some() || a.clock_index(FAULT_CLOCK).is_some() {
        return verify_normalized(a);
    }
    let mut out = a.clone();
    let sink = out.locations.len();
    out.locations.push(FAULT_SINK.to_string());
    let sink_clock = out.clocks.len();
    out.clocks.push(FAULT_CLOCK.to_string());
    out.invariants
        .push(ClockConstraint::single(FAULT_CLOCK, Relation::Le, 1));
    for e in &mut out.edges {
        if a.alphabet.is_fault(&e.label) {
            e.dst = sink;
            e.resets.insert(sink_clock);
        }
    }
    for ev in &a.alphabet.observable {
        out.edges.push(TaEdge {
            src: sink,
            guard: ClockConstraint::truth(),
            label: Label::event(ev),
            resets: BTreeSet::from([sink_clock]),
            dst: sink,
        });
    }
    Ok(NormalizedTa { ta: out, sink, sink_clock })
}

fn verify_normalized(a: &TimedAutomaton) -> Result<NormalizedTa> {
    let sink = a.location_index(FAULT_SINK).ok_or_else(reserved_error)?;
    let sink_clock = a.clock_index(FAULT_CLOCK).ok_or_else(reserved_error)?;
    let faults_ok = a
        .edges
        .iter()
        .filter(|e| a.is_fault_edge(e))
        .all(|e| e.dst == sink && e.resets.contains(&sink_clock));
    let inv_ok =
        a.invariants[sink] == ClockConstraint::single(FAULT_CLOCK, Relation::Le, 1);
    let echo_ok = a.alphabet.observable.iter().all(|ev| {
        a.edges
            .iter()
            .any(|e| e.src == sink && e.dst == sink && e.label.name() == Some(ev))
    });
    if faults_ok && inv_ok && echo_ok {
        Ok(NormalizedTa { ta: a.clone(), sink, sink_clock })
    } else {
        Err(reserved_error())
    }
}

/// Observation grid `q/p` (in lowest terms): the observer acts only at
/// integer multiples of this period.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SamplingSpec {
    pub q: u64,
    pub p: u64,
}

impl SamplingSpec {
    pub fn new(q: u64, p: u64) -> Result<SamplingSpec> {
        if q == 0 || p == 0 {
            return Err(Error::input("sampling period must be positive"));
        }
        let r = rational(q as i64, p as i64);
        Ok(SamplingSpec { q: *r.numer() as u64, p: *r.denom() as u64 })
    }

    /// Accepts "q/p" or a plain integer.
    pub fn parse(text: &str) -> Result<SamplingSpec> {
        let bad = || Error::input(format!("invalid sampling period: {text}"));
        match text.split_once('/') {
            Some((n, d)) => SamplingSpec::new(
                n.trim().parse().map_err(|_| bad())?,
                d.trim().parse().map_err(|_| bad())?,
            ),
            None => SamplingSpec::new(text.trim().parse().map_err(|_| bad())?, 1),
        }
    }

    pub fn period(&self) -> Rational {
        rational(self.q as i64, self.p as i64)
    }
}

impl std::fmt::Display for SamplingSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}", self.q, self.p)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct TwinOptions {
    /// Accept witnesses whose alternative explanation stops time (Zeno).
    pub allow_zeno: bool,
    /// Restrict the observer to a sampling grid.
    pub sampling: Option<SamplingSpec>,
}

/// Where each edge of the guessing component came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GuessEdge {
    /// Pre-switch copy of a model edge (observables still visible).
    Original(usize),
    /// The guess: the fault countdown starts now.
    Switch,
    /// Post-switch shadow copy of a model edge (everything silent).
    Shadow(usize),
    /// The shadowed run fires its fault within the bound.
    Fault(usize),
    /// Echo of an observable event after the switch.
    Echo,
    /// Unit pulse enforcing time divergence.
    Pulse,
    /// Sampling-grid bookkeeping.
    Tick,
}

/// The guessing component: original copy, silent shadow copy, and an
/// absorbing tail entered when the shadowed fault fires in time.
#[derive(Debug, Clone)]
pub struct GuessComponent {
    pub ta: TimedAutomaton,
    pub provenance: Vec<GuessEdge>,
    /// Model location -> index of its pre-switch copy.
    pub original: Vec<Option<usize>>,
    /// Model location -> index of its shadow copy.
    pub shadow: Vec<Option<usize>>,
    pub end: usize,
    pub pulse: Option<usize>,
    pub switch_clock: usize,
    pub sample_clock: Option<usize>,
}

/// Builds the guessing component for an anticipation bound already expressed
/// in the model's (possibly rescaled) time unit.
pub fn build_guess_component(
    norm: &NormalizedTa,
    bound: u64,
    opts: &TwinOptions,
) -> GuessComponent {
    let a = &norm.ta;
    let n = a.locations.len();
    let keep: Vec<usize> = (0..n).filter(|&i| i != norm.sink).collect();

    let mut original = vec![None; n];
    let mut shadow = vec![None; n];
    let mut locations = Vec::new();
    let mut invariants = Vec::new();
    for (pos, &old) in keep.iter().enumerate() {
        original[old] = Some(pos);
        locations.push(a.locations[old].clone());
        invariants.push(a.invariants[old].clone());
    }
    for (pos, &old) in keep.iter().enumerate() {
        shadow[old] = Some(keep.len() + pos);
        locations.push(format!("{}~", a.locations[old]));
        invariants.push(a.invariants[old].clone());
    }
    let unique = |names: &Vec<String>, base: &str| {
        let mut cand = base.to_string();
        while names.contains(&cand) {
            cand.push('_');
        }
        cand
    };
    let end = locations.len();
    let end_name = unique(&locations, "end");
    locations.push(end_name);
    invariants.push(if opts.allow_zeno {
        ClockConstraint::truth()
    } else {
        ClockConstraint::truth() // patched to y <= 1 below, once y is named
    });
    let pulse = if opts.allow_zeno {
        None
    } else {
        let name = unique(&locations, "beat");
        locations.push(name);
        invariants.push(ClockConstraint::truth()); // patched to y <= 0 below
        Some(end + 1)
    };

    let fresh = |clocks: &Vec<String>, base: &str| {
        let mut cand = base.to_string();
        let mut i = 0u32;
        while clocks.contains(&cand) {
            cand = format!("{base}{i}");
            i += 1;
        }
        cand
    };
    let mut clocks = a.clocks.clone();
    let switch_name = fresh(&clocks, "y");
    let switch_clock = clocks.len();
    clocks.push(switch_name.clone());
    let sample_name = opts.sampling.map(|_| fresh(&clocks, "s"));
    let sample_clock = sample_name.as_ref().map(|name| {
        clocks.push(name.clone());
        clocks.len() - 1
    });

    if !opts.allow_zeno {
        invariants[end] = ClockConstraint::single(&switch_name, Relation::Le, 1);
        invariants[pulse.unwrap()] = ClockConstraint::single(&switch_name, Relation::Le, 0);
    }
    // A shadowed run that outlives the countdown can never fire its fault and
    // so can never reach the absorbing tail.  Cutting those runs off with an
    // invariant keeps the symbolic exploration close to the part that matters;
    // it removes no accepting behaviour because the countdown clock only grows
    // between the switch and the fault.
    for &old in &keep {
        let at = shadow[old].unwrap();
        invariants[at] =
            invariants[at].and(&ClockConstraint::single(&switch_name, Relation::Le, bound));
    }

    let mut edges = Vec::new();
    let mut provenance = Vec::new();
    let model_edge = |e: &TaEdge| !a.is_fault_edge(e) && e.src != norm.sink && e.dst != norm.sink;

    // pre-switch copy: unobservable events are hidden, the rest kept
    for (ei, e) in a.edges.iter().enumerate().filter(|(_, e)| model_edge(e)) {
        edges.push(TaEdge {
            src: original[e.src].unwrap(),
            guard: e.guard.clone(),
            label: if a.alphabet.label_observable(&e.label) {
                e.label.clone()
            } else {
                Label::Silent
            },
            resets: e.resets.clone(),
            dst: original[e.dst].unwrap(),
        });
        provenance.push(GuessEdge::Original(ei));
    }
    // the switch, any time (or on the sampling grid), starts the countdown
    let switch_guard = match (&sample_name, sample_clock) {
        (Some(name), Some(_)) => ClockConstraint::single(name, Relation::Eq, 0),
        _ => ClockConstraint::truth(),
    };
    for &old in &keep {
        edges.push(TaEdge {
            src: original[old].unwrap(),
            guard: switch_guard.clone(),
            label: Label::Silent,
            resets: BTreeSet::from([switch_clock]),
            dst: shadow[old].unwrap(),
        });
        provenance.push(GuessEdge::Switch);
    }
    // shadow copy: the doomed continuation, entirely silent
    for (ei, e) in a.edges.iter().enumerate().filter(|(_, e)| model_edge(e)) {
        edges.push(TaEdge {
            src: shadow[e.src].unwrap(),
            guard: e.guard.clone(),
            label: Label::Silent,
            resets: e.resets.clone(),
            dst: shadow[e.dst].unwrap(),
        });
        provenance.push(GuessEdge::Shadow(ei));
    }
    // the shadowed fault fires while the countdown is within the bound
    for (ei, e) in a.edges.iter().enumerate().filter(|(_, e)| a.is_fault_edge(e)) {
        edges.push(TaEdge {
            src: shadow[e.src].unwrap(),
            guard: e
                .guard
                .and(&ClockConstraint::single(&switch_name, Relation::Le, bound)),
            label: Label::Silent,
            resets: BTreeSet::from([switch_clock]),
            dst: end,
        });
        provenance.push(GuessEdge::Fault(ei));
    }
    // observations after the switch are echoed, not constrained; the pulse
    // location carries no echoes, so accepting cycles cannot spin there in
    // zero time — they must pay one time unit per round
    let mut echo_sites: Vec<usize> = keep.iter().map(|&old| shadow[old].unwrap()).collect();
    echo_sites.push(end);
    for site in echo_sites {
        for ev in &a.alphabet.observable {
            edges.push(TaEdge {
                src: site,
                guard: ClockConstraint::truth(),
                label: Label::event(ev),
                resets: BTreeSet::new(),
                dst: site,
            });
            provenance.push(GuessEdge::Echo);
        }
    }
    // unit pulse: accepting behaviour must let time diverge
    if let Some(pulse_idx) = pulse {
        edges.push(TaEdge {
            src: end,
            guard: ClockConstraint::single(&switch_name, Relation::Eq, 1),
            label: Label::Silent,
            resets: BTreeSet::from([switch_clock]),
            dst: pulse_idx,
        });
        provenance.push(GuessEdge::Pulse);
        edges.push(TaEdge {
            src: pulse_idx,
            guard: ClockConstraint::truth(),
            label: Label::Silent,
            resets: BTreeSet::new(),
            dst: end,
        });
        provenance.push(GuessEdge::Pulse);
    }
    // sampling grid: a silent tick on every location, and the grid bound on
    // every invariant
    if let (Some(spec), Some(name), Some(sc)) = (opts.sampling, &sample_name, sample_clock) {
        for inv in &mut invariants {
            *inv = inv.and(&ClockConstraint::single(name, Relation::Le, spec.q));
        }
        for site in 0..locations.len() {
            edges.push(TaEdge {
                src: site,
                guard: ClockConstraint::single(name, Relation::Eq, spec.q),
                label: Label::Silent,
                resets: BTreeSet::from([sc]),
                dst: site,
            });
            provenance.push(GuessEdge::Tick);
        }
    }

    let repeated = match pulse {
        Some(p) => BTreeSet::from([p]),
        None => BTreeSet::from([end]),
    };
    let ta = TimedAutomaton {
        locations,
        initial: original[a.initial].expect("initial is never the fault sink"),
        clocks,
        alphabet: a.alphabet.clone(),
        edges,
        invariants,
        final_states: BTreeSet::new(),
        repeated,
    }
    .drop_unused_clocks();
    let switch_clock = ta.clock_index(&switch_name).expect("countdown clock in use");
    let sample_clock = sample_name.as_ref().map(|n| ta.clock_index(n).expect("grid clock in use"));
    GuessComponent {
        ta,
        provenance,
        original,
        shadow,
        end,
        pulse,
        switch_clock,
        sample_clock,
    }
}

/// The fault-free tracking component: the model without fault edges,
/// unobservable events hidden, trimmed to the reachable part, with clocks
/// renamed apart from `avoid` and every location accepting.
pub fn build_tracking_component(
    norm: &NormalizedTa,
    avoid_clocks: &[String],
) -> TimedAutomaton {
    let mut a = norm
        .ta
        .without_fault_edges()
        .prune_unreachable()
        .hide_unobservable()
        .drop_unused_clocks();
    let mut taken: Vec<String> = avoid_clocks.to_vec();
    let mut renames = Vec::new();
    for c in &a.clocks {
        let mut cand = format!("{c}_2");
        while taken.contains(&cand) {
            cand.push('_');
        }
        taken.push(cand.clone());
        renames.push((c.clone(), cand));
    }
    a = a.rename_clocks(|c| {
        renames
            .iter()
            .find(|(old, _)| old == c)
            .map(|(_, new)| new.clone())
            .expect("every clock has a rename")
    });
    a.repeated = (0..a.locations.len()).collect();
    a.final_states = (0..a.locations.len()).collect();
    a
}

/// Synchronized product: shared observable events move together with
/// conjoined guards and unioned resets, silent edges interleave, invariants
/// conjoin.  Accepting condition is inherited from the FIRST component (the
/// second is expected to accept everywhere).
#[derive(Debug, Clone)]
pub struct TaProduct {
    pub ta: TimedAutomaton,
    pub pairs: Vec<(usize, usize)>,
    pub edge_src: Vec<(Option<usize>, Option<usize>)>,
}

pub fn ta_product(a1: &TimedAutomaton, a2: &TimedAutomaton) -> Result<TaProduct> {
    if a1.alphabet.observable != a2.alphabet.observable {
        return Err(Error::input(
            "product components must agree on the observable events",
        ));
    }
    if a1.clocks.iter().any(|c| a2.clocks.contains(c)) {
        return Err(Error::internal("product components share a clock name"));
    }
    let clocks: Vec<String> = a1.clocks.iter().chain(a2.clocks.iter()).cloned().collect();
    let shift = a1.clocks.len();

    let mut pairs: Vec<(usize, usize)> = vec![(a1.initial, a2.initial)];
    let mut index = std::collections::HashMap::new();
    index.insert((a1.initial, a2.initial), 0usize);
    let mut edges: Vec<TaEdge> = Vec::new();
    let mut edge_src = Vec::new();
    let mut frontier = 0;
    while frontier < pairs.len() {
        let (p, q) = pairs[frontier];
        let src = frontier;
        frontier += 1;
        let intern = |pairs: &mut Vec<(usize, usize)>,
                          index: &mut std::collections::HashMap<(usize, usize), usize>,
                          pq: (usize, usize)| {
            *index.entry(pq).or_insert_with(|| {
                pairs.push(pq);
                pairs.len() - 1
            })
        };
        for (i1, e1) in a1.edges.iter().enumerate().filter(|(_, e)| e.src == p) {
            if e1.label.is_silent() {
                let dst = intern(&mut pairs, &mut index, (e1.dst, q));
                edges.push(TaEdge {
                    src,
                    guard: e1.guard.clone(),
                    label: Label::Silent,
                    resets: e1.resets.clone(),
                    dst,
                });
                edge_src.push((Some(i1), None));
            } else {
                for (i2, e2) in a2
                    .edges
                    .iter()
                    .enumerate()
                    .filter(|(_, e)| e.src == q && e.label == e1.label)
                {
                    let dst = intern(&mut pairs, &mut index, (e1.dst, e2.dst));
                    let mut resets = e1.resets.clone();
                    resets.extend(e2.resets.iter().map(|c| c + shift));
                    edges.push(TaEdge {
                        src,
                        guard: e1.guard.and(&e2.guard),
                        label: e1.label.clone(),
                        resets,
                        dst,
                    });
                    edge_src.push((Some(i1), Some(i2)));
                }
            }
        }
        for (i2, e2) in a2
            .edges
            .iter()
            .enumerate()
            .filter(|(_, e)| e.src == q && e.label.is_silent())
        {
            let dst = intern(&mut pairs, &mut index, (p, e2.dst));
            edges.push(TaEdge {
                src,
                guard: e2.guard.clone(),
                label: Label::Silent,
                resets: e2.resets.iter().map(|c| c + shift).collect(),
                dst,
            });
            edge_src.push((None, Some(i2)));
        }
    }

    let locations: Vec<String> = pairs
        .iter()
        .map(|&(p, q)| format!("({},{})", a1.locations[p], a2.locations[q]))
        .collect();
    let invariants = pairs
        .iter()
        .map(|&(p, q)| a1.invariants[p].and(&a2.invariants[q]))
        .collect();
    let repeated = pairs
        .iter()
        .enumerate()
        .filter(|(_, (p, _))| a1.repeated.contains(p))
        .map(|(i, _)| i)
        .collect();
    let ta = TimedAutomaton {
        locations,
        initial: 0,
        clocks,
        alphabet: a1.alphabet.clone(),
        edges,
        invariants,
        final_states: BTreeSet::new(),
        repeated,
    };
    Ok(TaProduct { ta, pairs, edge_src })
}

/// Counterexample to predictability at a bound: a run that faults, the
/// instant the countdown was started, and an observation stream that a
/// fault-free run explains forever.
#[derive(Debug, Clone)]
pub struct TaWitness {
    /// Explicit timed word of the model (all events named) ending with the
    /// fault.
    pub faulty: TimedWord,
    pub switch_time: Rational,
    pub fault_time: Rational,
    /// The observable stream both explanations produce, up to the start of
    /// the repeating part.
    pub observed: TimedWord,
    /// Observable events along the repeating part (possibly none: the
    /// alternative explanation may keep running silently).
    pub cycle: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct TaVerdict {
    pub predictable: bool,
    /// The bound checked: time units, or grid steps under sampling.
    pub bound: u64,
    pub witness: Option<TaWitness>,
}

fn scaled_normal(a: &TimedAutomaton, opts: &TwinOptions) -> Result<(NormalizedTa, u64, u64)> {
    let norm = normalize(a)?;
    match opts.sampling {
        Some(spec) => {
            let ta = norm.ta.scale_constants(spec.p);
            Ok((NormalizedTa { ta, ..norm }, spec.p, spec.q))
        }
        None => Ok((norm, 1, 1)),
    }
}

/// Decides predictability at anticipation `bound` (time units, or grid
/// steps when sampling is configured).
pub fn check_predictable(
    a: &TimedAutomaton,
    bound: u64,
    opts: &TwinOptions,
) -> Result<TaVerdict> {
    let (norm, p, step) = scaled_normal(a, opts)?;
    let scaled_bound = bound
        .checked_mul(step)
        .ok_or_else(|| Error::input("anticipation bound is out of range"))?;
    let guess = build_guess_component(&norm, scaled_bound, opts);
    let track = build_tracking_component(&norm, &guess.ta.clocks);
    let prod = ta_product(&guess.ta, &track)?;
    let trimmed = reset_inactive(&prod.ta);
    match buchi_lasso_zones(&trimmed)? {
        None => Ok(TaVerdict { predictable: true, bound, witness: None }),
        Some(symbolic) => {
            // Concretize on the unrolled lasso only: its region graph stays
            // tiny even when the full product's would not fit in memory.
            let (chain, back) = unroll_lasso(&trimmed, &symbolic)?;
            let graph = retarget(region_graph(&chain)?, &back);
            let lasso = buchi_lasso(&graph).ok_or_else(|| {
                Error::internal("symbolic lasso admits no concrete instance")
            })?;
            let witness = concretize_witness(
                &norm, &guess, &track, &prod, &trimmed, &graph, &lasso, p, scaled_bound,
            )?;
            Ok(TaVerdict { predictable: false, bound, witness: Some(witness) })
        }
    }
}

/// Assembles the product machine the decision procedure explores at the
/// given anticipation bound: the guessing component against the fault-free
/// tracking copy, with any sampling rescale already applied.
pub fn build_twin(
    a: &TimedAutomaton,
    bound: u64,
    opts: &TwinOptions,
) -> Result<TaProduct> {
    let (norm, _, step) = scaled_normal(a, opts)?;
    let scaled_bound = bound
        .checked_mul(step)
        .ok_or_else(|| Error::input("anticipation bound is out of range"))?;
    let guess = build_guess_component(&norm, scaled_bound, opts);
    let track = build_tracking_component(&norm, &guess.ta.clocks);
    ta_product(&guess.ta, &track)
}

/// Clocks whose value can still matter at each location: read by the
/// location's invariant, or by some guard reachable before the clock is
/// reset again.
fn active_clocks(a: &TimedAutomaton) -> Vec<BTreeSet<usize>> {
    let read = |c: &ClockConstraint| -> BTreeSet<usize> {
        c.atoms.iter().filter_map(|at| a.clock_index(&at.clock)).collect()
    };
    let mut active: Vec<BTreeSet<usize>> = a.invariants.iter().map(read).collect();
    loop {
        let mut changed = false;
        for e in &a.edges {
            let mut need = read(&e.guard);
            need.extend(active[e.dst].iter().filter(|c| !e.resets.contains(c)));
            let before = active[e.src].len();
            active[e.src].extend(need);
            changed |= active[e.src].len() != before;
        }
        if !changed {
            break;
        }
    }
    active
}

/// Zeroes every clock that stops mattering when an edge is taken.  States
/// that differ only on such clocks are bisimilar, so pinning them keeps the
/// semantics while collapsing the symbolic state space — the twin product
/// drags a lot of clocks that are dead most of the time.
fn reset_inactive(a: &TimedAutomaton) -> TimedAutomaton {
    let active = active_clocks(a);
    let mut out = a.clone();
    for e in &mut out.edges {
        for c in 0..a.clocks.len() {
            if !active[e.dst].contains(&c) {
                e.resets.insert(c);
            }
        }
    }
    out
}

/// Unrolls a zone-graph lasso into a chain-shaped automaton over the same
/// clocks: the stem once, then the cycle as a loop.  Also returns the map
/// from chain edge indices back to the source automaton's.
fn unroll_lasso(a: &TimedAutomaton, lasso: &ZoneLasso) -> Result<(TimedAutomaton, Vec<usize>)> {
    let bad = |msg: &str| Error::internal(format!("witness reconstruction failed: {msg}"));
    if lasso.cycle.is_empty() {
        return Err(bad("empty cycle"));
    }
    let mut underlying = vec![a.initial];
    for &ei in lasso.stem.iter().chain(&lasso.cycle) {
        let e = a.edges.get(ei).ok_or_else(|| bad("edge index out of range"))?;
        if e.src != *underlying.last().expect("nonempty by construction") {
            return Err(bad("lasso edges do not chain"));
        }
        underlying.push(e.dst);
    }
    let s = lasso.stem.len();
    let count = s + lasso.cycle.len();
    if underlying[count] != underlying[s] {
        return Err(bad("cycle does not close"));
    }
    let mut edges = Vec::with_capacity(count);
    let mut back = Vec::with_capacity(count);
    for (step, &ei) in lasso.stem.iter().chain(&lasso.cycle).enumerate() {
        let e = &a.edges[ei];
        edges.push(TaEdge {
            src: step,
            guard: e.guard.clone(),
            label: e.label.clone(),
            resets: e.resets.clone(),
            dst: if step + 1 == count { s } else { step + 1 },
        });
        back.push(ei);
    }
    let repeated: BTreeSet<usize> =
        (s..count).filter(|&i| a.repeated.contains(&underlying[i])).collect();
    if repeated.is_empty() {
        return Err(bad("cycle avoids every repeated location"));
    }
    Ok((
        TimedAutomaton {
            locations: (0..count).map(|i| format!("n{i}")).collect(),
            initial: 0,
            clocks: a.clocks.clone(),
            alphabet: a.alphabet.clone(),
            edges,
            invariants: (0..count).map(|i| a.invariants[underlying[i]].clone()).collect(),
            final_states: BTreeSet::new(),
            repeated,
        },
        back,
    ))
}

/// Rewrites chain edge indices inside a region graph back to the indices of
/// the automaton the chain was unrolled from.
fn retarget(graph: RegionGraph, back: &[usize]) -> RegionGraph {
    RegionGraph {
        edges: graph
            .edges
            .iter()
            .map(|e| RegionEdge {
                src: e.src,
                mv: match e.mv {
                    RegionMove::Step(i) => RegionMove::Step(back[i]),
                    RegionMove::Delay => RegionMove::Delay,
                },
                dst: e.dst,
            })
            .collect(),
        ..graph
    }
}

/// Smallest delay taking `v` (a valuation inside `from`) into the next
/// region.  Mirrors the single-step successor the region graph uses.
fn step_delay(from: &Region, v: &[Rational], max_len: usize) -> Rational {
    let one = Rational::from_integer(1);
    let mut on_integer = false;
    let mut min_gap: Option<Rational> = None;
    let mut top: Option<(usize, Rational)> = None;
    for c in 0..max_len {
        match from.status(c) {
            crate::timed::region::ClockStatus::At(_) => on_integer = true,
            crate::timed::region::ClockStatus::Frac { rank, .. } => {
                let frac = v[c] - v[c].floor();
                let gap = one - frac;
                if min_gap.map_or(true, |g| gap < g) {
                    min_gap = Some(gap);
                }
                if top.map_or(true, |(r, _)| rank > r) {
                    top = Some((rank, frac));
                }
            }
            crate::timed::region::ClockStatus::Unbounded => {}
        }
    }
    if on_integer {
        min_gap.unwrap_or(one) / 2
    } else {
        let (_, frac) = top.expect("delay step exists, so some clock is fractional");
        one - frac
    }
}

fn word_of(events: &[(Rational, String)], end: Rational) -> Result<TimedWord> {
    let mut delays = Vec::with_capacity(events.len() + 1);
    let mut prev = Rational::from_integer(0);
    for (t, _) in events {
        delays.push(t - prev);
        prev = *t;
    }
    delays.push(end - prev);
    TimedWord::new(delays, events.iter().map(|(_, e)| e.clone()).collect())
}

fn unscale(w: &TimedWord, p: u64) -> TimedWord {
    let f = rational(1, p as i64);
    TimedWord {
        delays: w.delays.iter().map(|d| d * f).collect(),
        events: w.events.clone(),
    }
}

#[allow(clippy::too_many_arguments)]
fn concretize_witness(
    norm: &NormalizedTa,
    guess: &GuessComponent,
    track: &TimedAutomaton,
    prod: &TaProduct,
    ta: &TimedAutomaton,
    graph: &crate::timed::region::RegionGraph,
    lasso: &RegionLasso,
    p: u64,
    scaled_bound: u64,
) -> Result<TaWitness> {
    let bad = |msg: &str| Error::internal(format!("witness reconstruction failed: {msg}"));

    // structural replay of the lasso
    let mut cursor = graph.initial.ok_or_else(|| bad("no initial node"))?;
    for &ei in lasso.stem.iter().chain(&lasso.cycle) {
        let e = &graph.edges[ei];
        if e.src != cursor {
            return Err(bad("lasso edges do not chain"));
        }
        cursor = e.dst;
    }
    let stem_end = lasso
        .stem
        .iter()
        .last()
        .map(|&ei| graph.edges[ei].dst)
        .unwrap_or(cursor);
    if lasso.cycle.is_empty() || cursor != stem_end {
        return Err(bad("cycle does not close"));
    }

    // concrete walk down the stem
    let nclocks = ta.clocks.len();
    let mut v = vec![Rational::from_integer(0); nclocks];
    let mut now = Rational::from_integer(0);
    let mut faulty_events: Vec<(Rational, String)> = Vec::new();
    let mut observed_events: Vec<(Rational, String)> = Vec::new();
    let mut switch_time = None;
    let mut fault_time = None;
    for &ei in &lasso.stem {
        let e = &graph.edges[ei];
        match e.mv {
            RegionMove::Delay => {
                let d = step_delay(&graph.nodes[e.src].region, &v, nclocks);
                now += d;
                for value in &mut v {
                    *value += d;
                }
            }
            RegionMove::Step(pei) => {
                let pe = &ta.edges[pei];
                if let Some(name) = pe.label.name() {
                    observed_events.push((now, name.to_string()));
                }
                if let (Some(i1), _) = prod.edge_src[pei] {
                    match guess.provenance[i1] {
                        GuessEdge::Original(mi) | GuessEdge::Shadow(mi) => {
                            if let Some(name) = norm.ta.edges[mi].label.name() {
                                faulty_events.push((now, name.to_string()));
                            }
                        }
                        GuessEdge::Switch => {
                            if switch_time.is_none() {
                                switch_time = Some(now);
                            }
                        }
                        GuessEdge::Fault(mi) => {
                            if fault_time.is_none() {
                                let name = norm.ta.edges[mi]
                                    .label
                                    .name()
                                    .ok_or_else(|| bad("fault edge is unnamed"))?;
                                faulty_events.push((now, name.to_string()));
                                fault_time = Some(now);
                            }
                        }
                        GuessEdge::Echo | GuessEdge::Pulse | GuessEdge::Tick => {}
                    }
                }
                for &c in &pe.resets {
                    v[c] = Rational::from_integer(0);
                }
            }
        }
    }
    let switch_time = switch_time.ok_or_else(|| bad("no switch on the stem"))?;
    let fault_time = fault_time.ok_or_else(|| bad("no fault on the stem"))?;
    if fault_time - switch_time > Rational::from_integer(scaled_bound as i64) {
        return Err(bad("fault fires outside the bound"));
    }

    let cycle: Vec<String> = lasso
        .cycle
        .iter()
        .filter_map(|&ei| match graph.edges[ei].mv {
            RegionMove::Step(pei) => ta.edges[pei].label.name().map(str::to_string),
            RegionMove::Delay => None,
        })
        .collect();

    let faulty = word_of(&faulty_events, fault_time)?;
    let observed = word_of(&observed_events, now)?;

    // the faulty word must really drive the model into the fault sink
    let replay = concrete_run(&norm.ta, &faulty)?;
    if !replay.accepted || !replay.states.iter().all(|s| s.location == norm.sink) {
        return Err(bad("faulty word does not reach the fault sink"));
    }
    // and the observed stream must have a fault-free explanation
    let alt = concrete_run(track, &observed)?;
    if !alt.accepted {
        return Err(bad("observed stream has no fault-free explanation"));
    }

    Ok(TaWitness {
        faulty: unscale(&faulty, p),
        switch_time: switch_time / Rational::from_integer(p as i64),
        fault_time: fault_time / Rational::from_integer(p as i64),
        observed: unscale(&observed, p),
        cycle,
    })
}

/// Outcome of maximizing the anticipation bound.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TaMaxBound {
    /// No fault is reachable, or no fault-free behaviour runs forever:
    /// every bound works.
    Infinite,
    /// Largest bound (time units, or grid steps under sampling) that works.
    Value(u64),
    /// Not predictable at any bound.
    NotPredictable,
}

#[derive(Debug, Clone)]
pub struct MaxBoundOutcome {
    pub bound: TaMaxBound,
    /// Anticipation in real time units: bound times the sampling period.
    pub effective: Option<Rational>,
    /// Upper end of the searched range.
    pub cap: u64,
}

/// Whether the fault-free component has any accepting infinite behaviour;
/// time divergence is required unless Zeno runs are allowed.
fn tracking_is_empty(track: &TimedAutomaton, allow_zeno: bool) -> Result<bool> {
    if allow_zeno {
        return Ok(buchi_lasso_zones(&reset_inactive(track))?.is_none());
    }
    let mut clock = "tic".to_string();
    while track.clocks.contains(&clock) {
        clock.push('_');
    }
    let monitor = TimedAutomaton {
        locations: vec!["m0".into(), "m1".into()],
        initial: 0,
        clocks: vec![clock.clone()],
        alphabet: EventAlphabet::new(track.alphabet.observable.clone(), Vec::new(), None)?,
        edges: vec![
            TaEdge {
                src: 0,
                guard: ClockConstraint::single(&clock, Relation::Eq, 1),
                label: Label::Silent,
                resets: BTreeSet::from([0]),
                dst: 1,
            },
            TaEdge {
                src: 1,
                guard: ClockConstraint::truth(),
                label: Label::Silent,
                resets: BTreeSet::new(),
                dst: 0,
            },
        ]
        .into_iter()
        .chain(track.alphabet.observable.iter().map(|ev| TaEdge {
            // echoes live on m0 only: any accepting cycle must then take the
            // tic==1 edge into m1, paying one time unit per visit
            src: 0,
            guard: ClockConstraint::truth(),
            label: Label::event(ev),
            resets: BTreeSet::new(),
            dst: 0,
        }))
        .collect(),
        invariants: vec![
            ClockConstraint::single(&clock, Relation::Le, 1),
            ClockConstraint::single(&clock, Relation::Le, 0),
        ],
        final_states: BTreeSet::new(),
        repeated: BTreeSet::from([1]),
    };
    let prod = ta_product(&monitor, track)?;
    Ok(buchi_lasso_zones(&reset_inactive(&prod.ta))?.is_none())
}

/// Largest anticipation bound at which the model stays predictable.
///
/// Monotone: a model predictable at a bound is predictable at any smaller
/// one, so a binary search over `[0, cap]` suffices, where `cap` is the
/// earliest possible fault instant (in grid steps under sampling) — beyond
/// it, the countdown would have to start before time zero.
pub fn max_bound(a: &TimedAutomaton, opts: &TwinOptions) -> Result<MaxBoundOutcome> {
    let (norm, _p, step) = scaled_normal(a, opts)?;
    let effective = |bound: u64| {
        opts.sampling
            .map(|s| Rational::from_integer(bound as i64) * s.period())
    };
    let kappa = match min_time_to_fault(&norm.ta)? {
        None => {
            return Ok(MaxBoundOutcome { bound: TaMaxBound::Infinite, effective: None, cap: 0 })
        }
        Some(k) => k,
    };
    let track = build_tracking_component(&norm, &[]);
    if tracking_is_empty(&track, opts.allow_zeno)? {
        return Ok(MaxBoundOutcome { bound: TaMaxBound::Infinite, effective: None, cap: 0 });
    }
    let cap = kappa / step;
    if !check_predictable(a, 0, opts)?.predictable {
        return Ok(MaxBoundOutcome {
            bound: TaMaxBound::NotPredictable,
            effective: None,
            cap,
        });
    }
    let (mut lo, mut hi) = (0u64, cap);
    while lo < hi {
        let mid = lo + (hi - lo + 1) / 2;
        if check_predictable(a, mid, opts)?.predictable {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    Ok(MaxBoundOutcome { bound: TaMaxBound::Value(lo), effective: effective(lo), cap })
}

/// Rescales a model onto the sampling grid (all constants times `p`) and
/// returns it together with a standalone one-location grid automaton for
/// inspection: a silent tick every `q` rescaled units.
pub fn apply_sampling(
    a: &TimedAutomaton,
    spec: SamplingSpec,
) -> (TimedAutomaton, TimedAutomaton) {
    let scaled = a.scale_constants(spec.p);
    let clock = a.fresh_clock("s");
    let sampler = TimedAutomaton {
        locations: vec!["sampler".into()],
        initial: 0,
        clocks: vec![clock.clone()],
        alphabet: EventAlphabet::new(Vec::new(), Vec::new(), None)
            .expect("empty alphabet is valid"),
        edges: vec![TaEdge {
            src: 0,
            guard: ClockConstraint::single(&clock, Relation::Eq, spec.q),
            label: Label::Silent,
            resets: BTreeSet::from([0]),
            dst: 0,
        }],
        invariants: vec![ClockConstraint::single(&clock, Relation::Le, spec.q)],
        final_states: BTreeSet::new(),
        repeated: BTreeSet::from([0]),
    };
    (scaled, sampler)
}

/// Embeds a location-reachability question into a predictability question:
/// the returned model is predictable at bound 0 iff `target` is unreachable
/// in `a`.
///
/// From the target, a hidden fault and a hidden harmless event lead to a
/// fresh absorbing location that beats out one observable event per time
/// unit, so the faulty and fault-free continuations look identical forever.
pub fn embed_reachability(a: &TimedAutomaton, target: &str) -> Result<TimedAutomaton> {
    let t = a
        .location_index(target)
        .ok_or_else(|| Error::input(format!("unknown location: {target}")))?;
    if a.alphabet.fault.is_some() {
        return Err(Error::input(
            "reachability embedding expects a model without a fault event",
        ));
    }
    if a.alphabet.observable.is_empty() {
        return Err(Error::input(
            "reachability embedding needs at least one observable event",
        ));
    }
    let mut out = a.clone();
    let fault = out.alphabet.fresh_event("f");
    let mut unobservable = out.alphabet.unobservable.clone();
    unobservable.push(fault.clone());
    out.alphabet = EventAlphabet::new(
        out.alphabet.observable.clone(),
        unobservable,
        Some(fault.clone()),
    )?;
    let quiet = out.alphabet.fresh_event("u");
    let mut unobservable = out.alphabet.unobservable.clone();
    unobservable.push(quiet.clone());
    out.alphabet = EventAlphabet::new(
        out.alphabet.observable.clone(),
        unobservable,
        Some(fault.clone()),
    )?;

    let clock = out.fresh_clock("x");
    let ci = out.clocks.len();
    out.clocks.push(clock.clone());
    let trap = out.locations.len();
    out.locations.push(out.fresh_location("trap"));
    out.invariants
        .push(ClockConstraint::single(&clock, Relation::Le, 1));
    out.edges.push(TaEdge {
        src: t,
        guard: ClockConstraint::truth(),
        label: Label::event(&fault),
        resets: BTreeSet::from([ci]),
        dst: trap,
    });
    out.edges.push(TaEdge {
        src: t,
        guard: ClockConstraint::truth(),
        label: Label::event(&quiet),
        resets: BTreeSet::from([ci]),
        dst: trap,
    });
    for ev in &out.alphabet.observable.clone() {
        out.edges.push(TaEdge {
            src: trap,
            guard: ClockConstraint::single(&clock, Relation::Eq, 1),
            label: Label::event(ev),
            resets: BTreeSet::from([ci]),
            dst: trap,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{load_model, parse_model, Model};

    fn bundled(name: &str) -> TimedAutomaton {
        let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
            .join("../../models")
            .join(name);
        match load_model(&path).unwrap() {
            Model::Ta(a) => a,
            Model::Fa(_) => panic!("expected a timed model"),
        }
    }

    fn ta_from(json: &str) -> TimedAutomaton {
        match parse_model(json).unwrap() {
            Model::Ta(a) => a,
            Model::Fa(_) => panic!("expected a timed model"),
        }
    }

    #[test]
    fn normalization_redirects_faults_into_the_sink() {
        let a = bundled("g_timed.json");
        let norm = normalize(&a).unwrap();
        let ta = &norm.ta;
        assert_eq!(ta.location_name(norm.sink), FAULT_SINK);
        assert_eq!(ta.clocks[norm.sink_clock], FAULT_CLOCK);
        for e in ta.edges.iter().filter(|e| ta.is_fault_edge(e)) {
            assert_eq!(e.dst, norm.sink);
            assert!(e.resets.contains(&norm.sink_clock));
        }
        let echoes = ta
            .edges
            .iter()
            .filter(|e| e.src == norm.sink && e.dst == norm.sink)
            .count();
        assert_eq!(echoes, 3); // a, b, c

        // idempotent: a second pass accepts the result unchanged
        let again = normalize(&norm.ta).unwrap();
        assert_eq!(again.ta, norm.ta);
    }

    #[test]
    fn reserved_names_are_rejected() {
        let json = r#"{
            "type": "ta",
            "locations": ["l_f", "l1"],
            "initial": "l_f",
            "events": {"observable": ["a"], "unobservable": ["f"], "fault": "f"},
            "clocks": ["x"],
            "edges": [
                {"src": "l_f", "event": "f", "dst": "l1"},
                {"src": "l1", "event": "a", "dst": "l1"}
            ]
        }"#;
        let a = ta_from(json);
        let err = normalize(&a).unwrap_err();
        assert!(err.to_string().contains("reserved"));
    }

    #[test]
    fn guess_component_shape_for_the_stepped_model() {
        let a = bundled("g_timed.json");
        let norm = normalize(&a).unwrap();
        let guess = build_guess_component(&norm, 3, &TwinOptions::default());
        // 6 originals + 6 shadows + the absorbing tail + the pulse
        assert_eq!(guess.ta.locations.len(), 14);
        assert_eq!(guess.pulse, Some(guess.end + 1));
        let count = |k: fn(&GuessEdge) -> bool| {
            guess.provenance.iter().filter(|e| k(e)).count()
        };
        assert_eq!(count(|e| matches!(e, GuessEdge::Switch)), 6);
        assert_eq!(count(|e| matches!(e, GuessEdge::Fault(_))), 1);
        assert_eq!(count(|e| matches!(e, GuessEdge::Original(_))), 8);
        assert_eq!(count(|e| matches!(e, GuessEdge::Shadow(_))), 8);
        // echoes: 3 observables on each shadow and the tail, none on the pulse
        assert_eq!(count(|e| matches!(e, GuessEdge::Echo)), 7 * 3);
        // the fault edge carries the countdown bound
        let (fi, _) = guess
            .provenance
            .iter()
            .enumerate()
            .find(|(_, e)| matches!(e, GuessEdge::Fault(_)))
            .unwrap();
        let guard = &guess.ta.edges[fi].guard;
        let y = &guess.ta.clocks[guess.switch_clock];
        assert!(guard.atoms.iter().any(|at| &at.clock == y && at.constant == 3));
    }

    #[test]
    fn stepped_model_boundary_bounds() {
        let a = bundled("g_timed.json");
        let opts = TwinOptions::default();
        assert!(check_predictable(&a, 3, &opts).unwrap().predictable);
        let v4 = check_predictable(&a, 4, &opts).unwrap();
        assert!(!v4.predictable);
        let w = v4.witness.expect("counterexample at 4");
        assert_eq!(w.faulty.events.last().map(String::as_str), Some("f"));
        assert!(w.fault_time - w.switch_time <= rational(4, 1));
        assert!(w.fault_time >= rational(5, 1)); // no fault fires earlier
    }

    #[test]
    fn eventually_faulty_model_boundary_bounds() {
        let a = bundled("b.json");
        let opts = TwinOptions::default();
        assert!(check_predictable(&a, 4, &opts).unwrap().predictable);
        let v5 = check_predictable(&a, 5, &opts).unwrap();
        assert!(!v5.predictable);
        let w = v5.witness.unwrap();
        assert!(w.fault_time >= rational(6, 1));
        assert!(w.fault_time - w.switch_time <= rational(5, 1));
    }

    #[test]
    fn maximal_bounds_of_the_bundled_models() {
        let opts = TwinOptions::default();
        let g = max_bound(&bundled("g_timed.json"), &opts).unwrap();
        assert_eq!(g.bound, TaMaxBound::Value(3));
        assert_eq!(g.cap, 5);
        let b = max_bound(&bundled("b.json"), &opts).unwrap();
        assert_eq!(b.bound, TaMaxBound::Value(4));
        assert_eq!(b.cap, 6);
    }

    #[test]
    fn sampling_shrinks_what_the_observer_can_promise() {
        let a = bundled("b.json");
        let opts = TwinOptions {
            allow_zeno: false,
            sampling: Some(SamplingSpec::new(3, 5).unwrap()),
        };
        assert!(check_predictable(&a, 6, &opts).unwrap().predictable);
        assert!(!check_predictable(&a, 7, &opts).unwrap().predictable);
        let m = max_bound(&a, &opts).unwrap();
        assert_eq!(m.bound, TaMaxBound::Value(6));
        assert_eq!(m.effective, Some(rational(18, 5)));
        assert_eq!(m.cap, 10);
    }

    #[test]
    fn zeno_explanations_only_count_when_allowed() {
        // the only fault-free behaviours accumulate infinitely many events
        // in finite time; with divergence required they do not exist
        let json = r#"{
            "type": "ta",
            "locations": ["l0", "lz"],
            "initial": "l0",
            "events": {"observable": ["a"], "unobservable": ["u", "f"], "fault": "f"},
            "clocks": ["x"],
            "invariants": {"l0": "x<=3", "lz": "x<=4"},
            "edges": [
                {"src": "l0", "guard": "x>=2", "event": "f", "dst": "l0"},
                {"src": "l0", "guard": "x<1", "event": "u", "resets": ["x"], "dst": "lz"},
                {"src": "lz", "guard": "x<2", "event": "a", "dst": "lz"}
            ]
        }"#;
        let a = ta_from(json);
        let strict = max_bound(&a, &TwinOptions::default()).unwrap();
        assert_eq!(strict.bound, TaMaxBound::Infinite);
        let loose = max_bound(
            &a,
            &TwinOptions { allow_zeno: true, sampling: None },
        )
        .unwrap();
        assert_eq!(loose.bound, TaMaxBound::NotPredictable);
    }

    #[test]
    fn reachability_embedding_mirrors_reachability() {
        let json = r#"{
            "type": "ta",
            "locations": ["l0", "l1", "l2"],
            "initial": "l0",
            "events": {"observable": ["a"], "unobservable": []},
            "clocks": ["x"],
            "edges": [
                {"src": "l0", "guard": "x>=1", "event": "a", "resets": ["x"], "dst": "l1"}
            ]
        }"#;
        let a = ta_from(json);
        let hit = embed_reachability(&a, "l1").unwrap();
        assert!(!check_predictable(&hit, 0, &TwinOptions::default())
            .unwrap()
            .predictable);
        let miss = embed_reachability(&a, "l2").unwrap();
        assert!(check_predictable(&miss, 0, &TwinOptions::default())
            .unwrap()
            .predictable);
        // a fault event must not already be declared
        assert!(embed_reachability(&hit, "l1").is_err());
    }
}
