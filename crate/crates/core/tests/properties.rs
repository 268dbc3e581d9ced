//! Cross-cutting properties: zone algebra laws, monotonicity of the
//! predictability verdicts, agreement between the decision procedures and
//! the enumerative oracles on seeded random corpora, and an exhaustive
//! grid-enumeration cross-check of the online verdicts.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::path::Path;

use proptest::prelude::*;

use predictor_core::corpus::{random_bounded_ta, random_fa, rng_from_seed};
use predictor_core::fa::{backward_distance_df, fault_enabled_states, Dist};
use predictor_core::fa_predict::{check_k_predictable, kappa_fa, max_k, predictable_fa, MaxBound};
use predictor_core::model::{load_model, Model};
use predictor_core::oracle::{
    fa_oracle_k_predictable, gl_oracle, ta_reachable, validate_fa_witness, validate_ta_witness,
};
use predictor_core::predictor::{run_predictor, PredictOptions};
use predictor_core::ta_predict::{
    check_predictable, embed_reachability, max_bound, SamplingSpec, TaMaxBound, TwinOptions,
};
use predictor_core::timed::constraint::{ClockConstraint, Relation};
use predictor_core::timed::region::{region_graph, Region, RegionMove};
use predictor_core::timed::ta::{rational, Rational, TimedAutomaton, TimedWord};
use predictor_core::timed::zone::Zone;
use rand::Rng;

fn load_ta(name: &str) -> TimedAutomaton {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../models").join(name);
    match load_model(&path).unwrap() {
        Model::Ta(a) => a,
        Model::Fa(_) => panic!("expected a timed model"),
    }
}

// ---------------------------------------------------------------- zone laws

#[derive(Debug, Clone)]
enum ZoneOp {
    Tighten { clock: usize, rel: usize, num: i64, den: i64 },
    Up,
    Reset(usize),
}

const RELS: [Relation; 5] =
    [Relation::Lt, Relation::Le, Relation::Eq, Relation::Gt, Relation::Ge];

fn zone_op() -> impl Strategy<Value = ZoneOp> {
    prop_oneof![
        (0..3usize, 0..5usize, 0..=6i64, 1..=2i64)
            .prop_map(|(clock, rel, num, den)| ZoneOp::Tighten { clock, rel, num, den }),
        Just(ZoneOp::Up),
        (0..3usize).prop_map(ZoneOp::Reset),
    ]
}

fn build_zone(ops: &[ZoneOp]) -> Zone {
    let mut z = Zone::universe(3);
    for op in ops {
        match *op {
            ZoneOp::Tighten { clock, rel, num, den } => {
                z.and_rational(clock, RELS[rel], rational(num, den));
            }
            ZoneOp::Up => z.up(),
            ZoneOp::Reset(c) => z.reset(c),
        }
    }
    z
}

fn same_zone(a: &Zone, b: &Zone) -> bool {
    a.includes(b) && b.includes(a)
}

proptest! {
    #[test]
    fn self_intersection_changes_nothing(ops in prop::collection::vec(zone_op(), 0..12)) {
        let z = build_zone(&ops);
        prop_assert!(same_zone(&z.intersect(&z), &z));
        prop_assert!(same_zone(&z.intersect(&Zone::universe(3)), &z));
    }

    #[test]
    fn delay_closure_contains_its_input(ops in prop::collection::vec(zone_op(), 0..12)) {
        let z = build_zone(&ops);
        let mut wide = z.clone();
        wide.up();
        prop_assert!(wide.includes(&z));
    }

    #[test]
    fn clock_reset_is_idempotent(
        ops in prop::collection::vec(zone_op(), 0..12),
        clock in 0..3usize,
    ) {
        let mut once = build_zone(&ops);
        once.reset(clock);
        let mut twice = once.clone();
        twice.reset(clock);
        prop_assert!(same_zone(&once, &twice));
    }

    #[test]
    fn intersection_refines_both_operands(
        ops1 in prop::collection::vec(zone_op(), 0..12),
        ops2 in prop::collection::vec(zone_op(), 0..12),
    ) {
        let a = build_zone(&ops1);
        let b = build_zone(&ops2);
        let i = a.intersect(&b);
        prop_assert!(a.includes(&i));
        prop_assert!(b.includes(&i));
    }
}

// ------------------------------------------------ untimed corpus agreement

#[test]
fn backward_distances_satisfy_the_local_recurrence() {
    let mut rng = rng_from_seed(501);
    for _ in 0..50 {
        let a = random_fa(&mut rng);
        let dist = backward_distance_df(&a);
        let enabled = fault_enabled_states(&a);
        for q in 0..a.locations.len() {
            let expected = if enabled.contains(&q) {
                Dist::Steps(0)
            } else {
                a.edges
                    .iter()
                    .filter(|e| e.src == q && !a.alphabet.is_fault(&e.label))
                    .filter_map(|e| dist[e.dst].steps())
                    .min()
                    .map_or(Dist::Infinite, |m| Dist::Steps(m + 1))
            };
            assert_eq!(dist[q], expected, "location {q} of {:?}", a.locations);
        }
    }
}

#[test]
fn engine_and_oracle_agree_on_random_machines() {
    let mut rng = rng_from_seed(2023);
    let mut seen = [false; 2];
    for i in 0..200 {
        let a = random_fa(&mut rng);
        let kappa = kappa_fa(&a).steps().unwrap_or(4).min(4);
        let mut verdicts = Vec::new();
        for k in 0..=kappa.max(3) {
            let v = check_k_predictable(&a, k).unwrap();
            assert_eq!(
                v.predictable,
                v.witness.is_none(),
                "witness presence mismatch, instance {i}, k {k}"
            );
            if let Some(w) = &v.witness {
                validate_fa_witness(&a, k as usize, &w.prefaulty, &w.stem, &w.cycle)
                    .unwrap_or_else(|e| panic!("bad witness, instance {i}, k {k}: {e}"));
            }
            if k <= 3 {
                let o = fa_oracle_k_predictable(&a, k as usize).unwrap();
                assert_eq!(v.predictable, o, "oracle disagrees, instance {i}, k {k}");
            }
            verdicts.push(v.predictable);
        }
        // A verdict that holds at some k holds at every smaller k.
        for w in verdicts.windows(2) {
            assert!(w[0] || !w[1], "monotonicity broken, instance {i}");
        }
        assert_eq!(verdicts[0], predictable_fa(&a).unwrap());
        assert_eq!(verdicts[0], gl_oracle(&a).unwrap(), "belief oracle, instance {i}");
        seen[verdicts[0] as usize] = true;

        match max_k(&a).unwrap() {
            MaxBound::Infinite => {
                assert!(check_k_predictable(&a, 3).unwrap().predictable);
            }
            MaxBound::Value(m) => {
                assert!(check_k_predictable(&a, m).unwrap().predictable);
                if Dist::Steps(m) < kappa_fa(&a) {
                    assert!(!check_k_predictable(&a, m + 1).unwrap().predictable);
                }
            }
            MaxBound::NotPredictable => {
                assert!(!verdicts[0]);
            }
        }
    }
    assert!(seen[0] && seen[1], "corpus never produced both verdict classes");
}

// ------------------------------------------- reachability embedding corpus

#[test]
fn embedding_turns_reachability_into_unpredictability() {
    let opts = TwinOptions { allow_zeno: false, sampling: None };
    let mut rng = rng_from_seed(4099);
    let mut seen = [false; 2];
    for i in 0..100 {
        let a = random_bounded_ta(&mut rng);
        let pick = rng.gen_range(0..a.locations.len());
        let target = a.locations[pick].clone();
        let reached = ta_reachable(&a, &target).unwrap();
        let embedded = embed_reachability(&a, &target).unwrap();
        let verdict = check_predictable(&embedded, 0, &opts).unwrap();
        assert_eq!(
            reached, !verdict.predictable,
            "reachability of {target} disagrees with the verdict, instance {i}"
        );
        if let Some(w) = &verdict.witness {
            validate_ta_witness(&embedded, 0, None, w)
                .unwrap_or_else(|e| panic!("bad witness, instance {i}: {e}"));
        }
        seen[reached as usize] = true;
    }
    assert!(seen[0] && seen[1], "corpus never produced both verdict classes");
}

// ------------------------------------------------- bound monotonicity

#[test]
fn anticipation_verdicts_are_monotone_in_the_bound() {
    let opts = TwinOptions { allow_zeno: false, sampling: None };
    for name in ["g_timed.json", "b.json"] {
        let a = load_ta(name);
        let verdicts: Vec<bool> = (0..=7)
            .map(|d| check_predictable(&a, d, &opts).unwrap().predictable)
            .collect();
        for w in verdicts.windows(2) {
            assert!(w[0] || !w[1], "monotonicity broken on {name}: {verdicts:?}");
        }
        let outcome = max_bound(&a, &opts).unwrap();
        assert_eq!(
            verdicts[0],
            !matches!(outcome.bound, TaMaxBound::NotPredictable),
            "bound search disagrees with the zero-bound verdict on {name}"
        );
    }
}

// ------------------------------------------------- region graph soundness

fn atom_holds(v: Rational, rel: Relation, c: u64) -> bool {
    let c = Rational::from_integer(c as i64);
    match rel {
        Relation::Lt => v < c,
        Relation::Le => v <= c,
        Relation::Eq => v == c,
        Relation::Gt => v > c,
        Relation::Ge => v >= c,
    }
}

fn holds(a: &TimedAutomaton, c: &ClockConstraint, val: &[Rational]) -> bool {
    c.atoms.iter().all(|at| {
        a.clock_index(&at.clock)
            .is_some_and(|i| atom_holds(val[i], at.rel, at.constant))
    })
}

#[test]
fn concrete_simulations_stay_on_region_graph_paths() {
    let a = load_ta("b.json");
    let g = region_graph(&a).unwrap();
    let max = a.max_constants();
    let node_of = |loc: usize, val: &[Rational]| -> usize {
        let region = Region::of_valuation(val, &max);
        g.nodes
            .iter()
            .position(|n| n.location == loc && n.region == region)
            .unwrap_or_else(|| panic!("state ({loc}, {val:?}) has no region node"))
    };
    let delay_reaches = |from: usize, to: usize| -> bool {
        let mut seen = BTreeSet::from([from]);
        let mut queue = VecDeque::from([from]);
        while let Some(n) = queue.pop_front() {
            if n == to {
                return true;
            }
            for e in g.edges.iter().filter(|e| e.src == n && e.mv == RegionMove::Delay) {
                if seen.insert(e.dst) {
                    queue.push_back(e.dst);
                }
            }
        }
        false
    };

    let mut rng = rng_from_seed(77);
    for _ in 0..25 {
        let mut loc = a.initial;
        let mut val = vec![Rational::from_integer(0); a.clocks.len()];
        for _ in 0..14 {
            let before = node_of(loc, &val);
            if rng.gen_bool(0.5) {
                let step = rational(rng.gen_range(1..=4), 4);
                let next: Vec<Rational> = val.iter().map(|v| v + step).collect();
                if !holds(&a, &a.invariants[loc], &next) {
                    continue;
                }
                val = next;
                let after = node_of(loc, &val);
                assert!(
                    delay_reaches(before, after),
                    "no delay path for ({loc}, {val:?})"
                );
            } else {
                let enabled: Vec<(usize, _)> = a
                    .edges
                    .iter()
                    .enumerate()
                    .filter(|(_, e)| e.src == loc && holds(&a, &e.guard, &val))
                    .collect();
                if enabled.is_empty() {
                    continue;
                }
                let (idx, edge) = enabled[rng.gen_range(0..enabled.len())];
                let mut next = val.clone();
                for &c in &edge.resets {
                    next[c] = Rational::from_integer(0);
                }
                if !holds(&a, &a.invariants[edge.dst], &next) {
                    continue;
                }
                loc = edge.dst;
                val = next;
                let after = node_of(loc, &val);
                assert!(
                    g.edges
                        .iter()
                        .any(|e| e.src == before
                            && e.dst == after
                            && e.mv == RegionMove::Step(idx)),
                    "missing region move for edge {idx}"
                );
            }
        }
    }
}

// ----------------------------------- exhaustive cross-check of the verdicts

type CState = (usize, Vec<Rational>);

/// Closure under guard-satisfying unobservable edges at a fixed instant.
fn quiet_closure(a: &TimedAutomaton, states: &mut BTreeSet<CState>) {
    let mut queue: Vec<CState> = states.iter().cloned().collect();
    while let Some((loc, val)) = queue.pop() {
        for e in a.edges.iter().filter(|e| e.src == loc) {
            if a.alphabet.label_observable(&e.label) || a.alphabet.is_fault(&e.label) {
                continue;
            }
            if !holds(a, &e.guard, &val) {
                continue;
            }
            let mut next = val.clone();
            for &c in &e.resets {
                next[c] = Rational::from_integer(0);
            }
            if !holds(a, &a.invariants[e.dst], &next) {
                continue;
            }
            if states.insert((e.dst, next.clone())) {
                queue.push((e.dst, next));
            }
        }
    }
}

/// Fault-free states consistent with the observed prefix of `w` up to time
/// `upto`, explored exhaustively on a rational grid.  Sound and complete at
/// grid instants for one-clock models with integer constants.
fn consistent_states(
    a: &TimedAutomaton,
    w: &TimedWord,
    upto: Rational,
    grid: Rational,
) -> BTreeSet<CState> {
    let mut schedule: BTreeMap<Rational, Vec<String>> = BTreeMap::new();
    let mut at = Rational::from_integer(0);
    for (i, ev) in w.events.iter().enumerate() {
        at += w.delays[i];
        if at <= upto {
            schedule.entry(at).or_default().push(ev.clone());
        }
    }

    let mut states = BTreeSet::new();
    let zeros = vec![Rational::from_integer(0); a.clocks.len()];
    if holds(a, &a.invariants[a.initial], &zeros) {
        states.insert((a.initial, zeros));
    }
    quiet_closure(a, &mut states);

    let mut t = Rational::from_integer(0);
    loop {
        if let Some(events) = schedule.get(&t) {
            for ev in events {
                let mut next = BTreeSet::new();
                for (loc, val) in &states {
                    for e in a.edges.iter().filter(|e| e.src == *loc) {
                        if e.label.name() != Some(ev.as_str()) || !holds(a, &e.guard, val) {
                            continue;
                        }
                        let mut nv = val.clone();
                        for &c in &e.resets {
                            nv[c] = Rational::from_integer(0);
                        }
                        if holds(a, &a.invariants[e.dst], &nv) {
                            next.insert((e.dst, nv));
                        }
                    }
                }
                states = next;
                quiet_closure(a, &mut states);
            }
        }
        if t >= upto {
            break;
        }
        states = states
            .into_iter()
            .filter_map(|(loc, val)| {
                let next: Vec<Rational> = val.iter().map(|v| v + grid).collect();
                holds(a, &a.invariants[loc], &next).then_some((loc, next))
            })
            .collect();
        quiet_closure(a, &mut states);
        t += grid;
    }
    states
}

/// Whether a fault edge can fire within `budget` time units of `start`,
/// moving along non-fault edges on the grid.  Post-observation events are
/// unconstrained: the observer never sees them.
fn fault_within(a: &TimedAutomaton, start: &CState, budget: Rational, grid: Rational) -> bool {
    let mut best: BTreeMap<CState, Rational> = BTreeMap::new();
    let mut queue: VecDeque<(CState, Rational)> =
        VecDeque::from([(start.clone(), Rational::from_integer(0))]);
    while let Some(((loc, val), spent)) = queue.pop_front() {
        if best.get(&(loc, val.clone())).is_some_and(|b| *b <= spent) {
            continue;
        }
        best.insert((loc, val.clone()), spent);
        if a.edges
            .iter()
            .any(|e| e.src == loc && a.alphabet.is_fault(&e.label) && holds(a, &e.guard, &val))
        {
            return true;
        }
        for e in a.edges.iter().filter(|e| e.src == loc) {
            if a.alphabet.is_fault(&e.label) || !holds(a, &e.guard, &val) {
                continue;
            }
            let mut next = val.clone();
            for &c in &e.resets {
                next[c] = Rational::from_integer(0);
            }
            if holds(a, &a.invariants[e.dst], &next) {
                queue.push_back(((e.dst, next), spent));
            }
        }
        if spent + grid <= budget {
            let next: Vec<Rational> = val.iter().map(|v| v + grid).collect();
            if holds(a, &a.invariants[loc], &next) {
                queue.push_back(((loc, next), spent + grid));
            }
        }
    }
    false
}

fn cross_check(a: &TimedAutomaton, bound: u64, trace: &TimedWord, grid: Rational) {
    let opts = PredictOptions { sampling: None, verify: false };
    let run = run_predictor(a, bound, &opts, trace).unwrap();
    let budget = Rational::from_integer(bound as i64);
    for p in &run.points {
        let states = consistent_states(a, trace, p.time, grid);
        assert!(!states.is_empty(), "enumeration lost all explanations at {}", p.time);
        let expected = states.iter().any(|s| fault_within(a, s, budget, grid));
        assert_eq!(
            p.verdict, expected as u8,
            "verdict at {} disagrees with enumeration", p.time
        );
    }
}

#[test]
fn verdicts_match_exhaustive_run_enumeration() {
    let b = load_ta("b.json");
    let silent = TimedWord::new(vec![Rational::from_integer(3)], Vec::new()).unwrap();
    cross_check(&b, 4, &silent, rational(1, 4));
    let healthy = TimedWord::new(
        vec![rational(3, 2), Rational::from_integer(1), rational(1, 2)],
        vec!["a".into(), "a".into()],
    )
    .unwrap();
    cross_check(&b, 4, &healthy, rational(1, 4));

    let g = load_ta("g_timed.json");
    let stepped = TimedWord::new(
        vec![
            Rational::from_integer(1),
            Rational::from_integer(2),
            Rational::from_integer(1),
        ],
        vec!["a".into(), "c".into()],
    )
    .unwrap();
    cross_check(&g, 3, &stepped, rational(1, 4));
}

#[test]
fn sampled_verdicts_match_enumeration_after_scaling() {
    let b = load_ta("b.json");
    let spec = SamplingSpec::new(3, 5).unwrap();
    let opts = PredictOptions { sampling: Some(spec), verify: false };
    let trace = TimedWord::new(vec![rational(12, 5)], Vec::new()).unwrap();
    let run = run_predictor(&b, 6, &opts, &trace).unwrap();

    // Redo the arithmetic by hand: blow the model and the trace up by the
    // sampling denominator so every instant is rational with denominator 2.
    let scaled = b.scale_constants(5);
    let scaled_trace = trace.scale(5);
    let budget = Rational::from_integer(18);
    let grid = rational(1, 2);
    assert_eq!(run.points.len(), 5);
    for p in &run.points {
        let t = p.time * Rational::from_integer(5);
        let states = consistent_states(&scaled, &scaled_trace, t, grid);
        let expected = states.iter().any(|s| fault_within(&scaled, s, budget, grid));
        assert_eq!(p.verdict, expected as u8, "verdict at {} disagrees", p.time);
    }
}

#[test]
fn extra_observation_only_narrows_explanations() {
    let b = load_ta("b.json");
    let grid = rational(1, 4);
    let cut = rational(3, 2);
    let quiet = TimedWord::new(vec![cut], Vec::new()).unwrap();
    let observed = TimedWord::new(
        vec![cut, Rational::from_integer(0)],
        vec!["a".into()],
    )
    .unwrap();
    let before = consistent_states(&b, &quiet, cut, grid);
    let after = consistent_states(&b, &observed, cut, grid);
    assert!(!after.is_empty());
    // Everything explaining the longer observation is an `a`-successor of
    // something explaining the shorter one.
    let mut successors = BTreeSet::new();
    for (loc, val) in &before {
        for e in b.edges.iter().filter(|e| e.src == *loc) {
            if e.label.name() != Some("a") || !holds(&b, &e.guard, val) {
                continue;
            }
            let mut nv = val.clone();
            for &c in &e.resets {
                nv[c] = Rational::from_integer(0);
            }
            if holds(&b, &b.invariants[e.dst], &nv) {
                successors.insert((e.dst, nv));
            }
        }
    }
    quiet_closure(&b, &mut successors);
    assert!(after.is_subset(&successors));
}

#[test]
fn alarms_on_the_stepped_model_lead_the_fault() {
    let g = load_ta("g_timed.json");
    let opts = PredictOptions { sampling: None, verify: false };
    for fault_at in [Rational::from_integer(5), rational(11, 2), Rational::from_integer(6)] {
        let tail = fault_at - Rational::from_integer(3);
        let observed =
            TimedWord::new(vec![Rational::from_integer(1), Rational::from_integer(2), tail],
                vec!["a".into(), "c".into()])
            .unwrap();
        let run = run_predictor(&g, 3, &opts, &observed).unwrap();
        let alarm = run.first_alarm().expect("an alarm must fire before the fault");
        assert!(
            alarm <= fault_at - Rational::from_integer(3),
            "alarm at {alarm} is too late for a fault at {fault_at}"
        );
    }
}
