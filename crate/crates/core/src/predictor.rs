//! Online fault prediction over observed timed words.
//!
//! The predictor keeps a symbolic estimate of every fault-free explanation
//! of the observations so far and compares it against a precomputed window:
//! the states from which the fault can fire within the anticipation bound.
//! A verdict of 1 means some explanation has entered the window.

use std::collections::VecDeque;

use crate::alphabet::Label;
use crate::error::{Error, Result};
use crate::ta_predict::{
    check_predictable, normalize, NormalizedTa, SamplingSpec, TwinOptions,
};
use crate::timed::constraint::Relation;
use crate::timed::run::{SymbolicRunner, SymbolicState};
use crate::timed::ta::{rational, Rational, TimedAutomaton, TimedWord};
use crate::timed::zone::Zone;

const WINDOW_ZONE_CAP: usize = 200_000;

/// States from which the fault edge can fire along a fault-free run of
/// duration at most `bound`.
///
/// Computed as a backward fixpoint from the fault-enabled constraint sets:
/// alternating exact time-predecessors with discrete predecessors over
/// non-fault edges, while a scratch clock accumulates the remaining
/// duration.  The scratch clock is sliced at zero and dropped at the end,
/// so the returned zones range over the model's own clocks.
pub fn fault_window(n: &NormalizedTa, bound: u64) -> Result<Vec<(usize, Zone)>> {
    let a = &n.ta;
    let aux = a.clocks.len();
    let resolve = |name: &str| a.clock_index(name);
    let zero = Rational::from_integer(0);
    let time_pre = |loc: usize, z: &mut Zone| {
        z.down();
        z.and_constraint(&a.invariants[loc], resolve);
    };

    let mut queue: VecDeque<(usize, Zone)> = VecDeque::new();
    for e in &a.edges {
        if !a.alphabet.is_fault(&e.label) {
            continue;
        }
        let mut z = Zone::universe(aux + 1);
        z.and_constraint(&a.invariants[e.src], resolve);
        if !z.and_constraint(&e.guard, resolve) {
            continue;
        }
        z.and_rational(aux, Relation::Le, Rational::from_integer(bound as i64));
        time_pre(e.src, &mut z);
        if !z.is_empty() {
            queue.push_back((e.src, z));
        }
    }

    let mut passed: Vec<Vec<Zone>> = vec![Vec::new(); a.locations.len()];
    let mut stored = 0usize;
    while let Some((loc, z)) = queue.pop_front() {
        if passed[loc].iter().any(|p| p.includes(&z)) {
            continue;
        }
        passed[loc].retain(|p| !z.includes(p));
        passed[loc].push(z.clone());
        stored += 1;
        if stored > WINDOW_ZONE_CAP {
            return Err(Error::internal(
                "fault window fixpoint exceeded the exploration cap",
            ));
        }
        for e in &a.edges {
            if e.dst != loc || a.alphabet.is_fault(&e.label) {
                continue;
            }
            let mut s = z.clone();
            // the reset clocks are exactly zero on the far side of the edge
            for &c in &e.resets {
                s.and_rational(c, Relation::Eq, zero);
            }
            if s.is_empty() {
                continue;
            }
            for &c in &e.resets {
                s.free(c);
            }
            if !s.and_constraint(&e.guard, resolve) || s.is_empty() {
                continue;
            }
            if !s.and_constraint(&a.invariants[e.src], resolve) || s.is_empty() {
                continue;
            }
            time_pre(e.src, &mut s);
            if !s.is_empty() {
                queue.push_back((e.src, s));
            }
        }
    }

    let mut out: Vec<(usize, Zone)> = Vec::new();
    for (loc, zones) in passed.iter().enumerate() {
        for z in zones {
            let mut s = z.clone();
            s.and_rational(aux, Relation::Eq, zero);
            if s.is_empty() {
                continue;
            }
            let s = s.project_out(aux);
            if out.iter().any(|(l, w)| *l == loc && w.includes(&s)) {
                continue;
            }
            out.retain(|(l, w)| !(*l == loc && s.includes(w)));
            out.push((loc, s));
        }
    }
    Ok(out)
}

/// Online state estimator plus the precomputed fault window.
///
/// The estimate tracks fault-free explanations only: fault edges are
/// removed from the stepping model, so an estimate that empties means the
/// observation has no fault-free explanation at all.
pub struct Predictor {
    model: TimedAutomaton,
    window: Vec<(usize, Zone)>,
    states: Vec<SymbolicState>,
    now: Rational,
    consumed: usize,
}

impl Predictor {
    pub fn new(n: &NormalizedTa, bound: u64) -> Result<Predictor> {
        let window = fault_window(n, bound)?;
        let mut model = n.ta.clone();
        let keep: Vec<bool> = model
            .edges
            .iter()
            .map(|e| !model.alphabet.is_fault(&e.label))
            .collect();
        let mut it = keep.iter();
        model.edges.retain(|_| *it.next().expect("mask as long as edges"));
        let resolve = |name: &str| model.clock_index(name);
        let mut z = Zone::zero(model.clocks.len());
        z.and_constraint(&model.invariants[model.initial], resolve);
        if z.is_empty() {
            return Err(Error::input(
                "the initial location's invariant excludes the zero valuation",
            ));
        }
        let states = vec![SymbolicState { location: model.initial, zone: z }];
        Ok(Predictor {
            model,
            window,
            states,
            now: Rational::from_integer(0),
            consumed: 0,
        })
    }

    /// Time elapsed since the start of the observation.
    pub fn now(&self) -> Rational {
        self.now
    }

    /// Every (location, zone) pair consistent with the observations so far.
    pub fn estimate(&self) -> &[SymbolicState] {
        &self.states
    }

    fn inconsistent(&self) -> Error {
        Error::input(format!(
            "observation inconsistent with the model at time {}: no fault-free \
             explanation remains (after {} observed events)",
            self.now, self.consumed,
        ))
    }

    /// Lets `delay` time pass and then, if present, consumes one observable
    /// event.  Errors when no fault-free explanation survives.
    pub fn step(&mut self, delay: Rational, event: Option<&str>) -> Result<()> {
        if delay < Rational::from_integer(0) {
            return Err(Error::input("observation delays must be non-negative"));
        }
        let model = &self.model;
        let free = |l: &Label| match l.name() {
            None => true,
            Some(name) => !model.alphabet.is_observable(name),
        };
        let mut runner = SymbolicRunner::new(model, free);
        runner.replace_states(std::mem::take(&mut self.states));
        runner.advance(delay)?;
        self.now += delay;
        if runner.is_empty() {
            return Err(self.inconsistent());
        }
        if let Some(name) = event {
            if !model.alphabet.is_observable(name) {
                return Err(Error::input(format!(
                    "`{name}` is not an observable event of the model"
                )));
            }
            let alive = runner.observe(name);
            self.consumed += 1;
            if !alive {
                return Err(self.inconsistent());
            }
        }
        self.states = runner.states().to_vec();
        Ok(())
    }

    /// 1 when some explanation can reach the fault within the bound.
    pub fn verdict(&self) -> u8 {
        let hit = self.states.iter().any(|st| {
            self.window.iter().any(|(loc, z)| {
                *loc == st.location && !st.zone.intersect(z).is_empty()
            })
        });
        u8::from(hit)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PredictOptions {
    /// Observation grid; verdict rows are emitted at its multiples.
    pub sampling: Option<SamplingSpec>,
    /// Check up front that the model is predictable at this bound and
    /// attach a warning when it is not.
    pub verify: bool,
}

impl Default for PredictOptions {
    fn default() -> Self {
        PredictOptions { sampling: None, verify: true }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredictionPoint {
    pub time: Rational,
    pub verdict: u8,
}

#[derive(Debug, Clone)]
pub struct PredictionTrace {
    /// Anticipation bound: time units, or grid steps under sampling.
    pub bound: u64,
    /// Spacing of the verdict rows.
    pub period: Rational,
    pub points: Vec<PredictionPoint>,
    /// Set when the model is not predictable at this configuration, in
    /// which case verdicts are best-effort.
    pub warning: Option<String>,
}

impl PredictionTrace {
    /// Time of the earliest 1-verdict, if any.
    pub fn first_alarm(&self) -> Option<Rational> {
        self.points.iter().find(|p| p.verdict == 1).map(|p| p.time)
    }
}

fn against_prefix(e: Error, at: Rational, consumed: usize) -> Error {
    match e {
        Error::Input(_) => Error::input(format!(
            "trace is inconsistent with the model at time {at}: no fault-free \
             explanation remains (after {consumed} observed events)",
        )),
        other => other,
    }
}

/// Folds a whole observed word into verdict rows.
///
/// Rows are emitted at every multiple of the observation period and at
/// every event instant; the trailing delay is still consumed, so an
/// inconsistency anywhere in the word surfaces even past the last row.
pub fn run_predictor(
    a: &TimedAutomaton,
    bound: u64,
    opts: &PredictOptions,
    trace: &TimedWord,
) -> Result<PredictionTrace> {
    for ev in &trace.events {
        if !a.alphabet.is_observable(ev) {
            return Err(Error::input(format!(
                "trace event `{ev}` is not an observable event of the model"
            )));
        }
    }
    let warning = if opts.verify {
        let twin = TwinOptions { allow_zeno: false, sampling: opts.sampling };
        let v = check_predictable(a, bound, &twin)?;
        if v.predictable {
            None
        } else {
            Some(match opts.sampling {
                Some(s) => format!(
                    "the model is not predictable at {bound} grid steps of {s}; \
                     verdicts are best-effort"
                ),
                None => format!(
                    "the model is not predictable at anticipation {bound}; \
                     verdicts are best-effort"
                ),
            })
        }
    } else {
        None
    };

    let (p, q) = match opts.sampling {
        Some(s) => (s.p, s.q),
        None => (1, 1),
    };
    let norm = normalize(a)?;
    let scaled = NormalizedTa { ta: norm.ta.scale_constants(p), ..norm };
    let scaled_bound = bound
        .checked_mul(q)
        .ok_or_else(|| Error::input("anticipation bound is out of range"))?;
    let mut pred = Predictor::new(&scaled, scaled_bound)?;

    let w = trace.scale(p);
    let total = w.duration();
    let grid = Rational::from_integer(q as i64);
    let unscale = rational(1, p as i64);

    let mut instants: Vec<Rational> = Vec::new();
    let mut t = Rational::from_integer(0);
    while t <= total {
        instants.push(t);
        t += grid;
    }
    let mut event_times: Vec<Rational> = Vec::with_capacity(w.events.len());
    let mut at = Rational::from_integer(0);
    for i in 0..w.events.len() {
        at += w.delays[i];
        event_times.push(at);
        instants.push(at);
    }
    instants.sort();
    instants.dedup();

    let mut points = Vec::new();
    let mut next_event = 0usize;
    let mut now = Rational::from_integer(0);
    for t in instants {
        pred.step(t - now, None)
            .map_err(|e| against_prefix(e, t * unscale, next_event))?;
        while next_event < w.events.len() && event_times[next_event] == t {
            pred.step(Rational::from_integer(0), Some(&w.events[next_event]))
                .map_err(|e| against_prefix(e, t * unscale, next_event))?;
            next_event += 1;
        }
        points.push(PredictionPoint { time: t * unscale, verdict: pred.verdict() });
        now = t;
    }
    if now < total {
        pred.step(total - now, None)
            .map_err(|e| against_prefix(e, total * unscale, next_event))?;
    }
    Ok(PredictionTrace { bound, period: rational(q as i64, p as i64), points, warning })
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

    fn point(dim: usize, values: &[Rational]) -> Zone {
        let mut z = Zone::universe(dim);
        for (i, v) in values.iter().enumerate() {
            z.and_rational(i, Relation::Eq, *v);
        }
        z
    }

    // the normalized model carries the sink clock as a second, otherwise
    // unconstrained dimension; zero stands in for it in membership probes
    fn window_holds(w: &[(usize, Zone)], loc: usize, x: Rational) -> bool {
        let p = point(2, &[x, rational(0, 1)]);
        w.iter().any(|(l, z)| *l == loc && z.includes(&p))
    }

    #[test]
    fn window_opens_two_units_before_the_earliest_fault() {
        let n = normalize(&bundled("b.json")).unwrap();
        let w = fault_window(&n, 4).unwrap();
        let l0 = n.ta.location_index("l0").unwrap();
        assert!(window_holds(&w, l0, rational(2, 1)));
        assert!(window_holds(&w, l0, rational(3, 1)));
        assert!(window_holds(&w, l0, rational(8, 1)));
        assert!(!window_holds(&w, l0, rational(9, 5)));
        assert!(!window_holds(&w, l0, rational(9, 1)));
        // nothing reaches the fault from the echo branch
        assert!(w.iter().all(|(l, _)| *l == l0));
    }

    #[test]
    fn window_at_zero_is_the_enabled_region() {
        let n = normalize(&bundled("b.json")).unwrap();
        let w = fault_window(&n, 0).unwrap();
        let l0 = n.ta.location_index("l0").unwrap();
        assert!(window_holds(&w, l0, rational(6, 1)));
        assert!(window_holds(&w, l0, rational(8, 1)));
        assert!(!window_holds(&w, l0, rational(59, 10)));
    }

    #[test]
    fn no_fault_edges_mean_an_empty_window() {
        let mut a = bundled("b.json");
        a.edges.retain(|e| !a.alphabet.clone().is_fault(&e.label));
        let n = normalize(&a).unwrap();
        assert!(fault_window(&n, 4).unwrap().is_empty());
    }

    #[test]
    fn estimate_pins_the_quiet_explanation_at_twelve_fifths() {
        let n = normalize(&bundled("b.json")).unwrap();
        let mut pred = Predictor::new(&n, 4).unwrap();
        pred.step(rational(12, 5), None).unwrap();
        let l0 = n.ta.location_index("l0").unwrap();
        // the early switch would have produced an `a` before time 2
        assert_eq!(pred.estimate().len(), 1);
        assert_eq!(pred.estimate()[0].location, l0);
        let at = point(2, &[rational(12, 5), rational(12, 5)]);
        assert!(pred.estimate()[0].zone.includes(&at));
        let off = point(2, &[rational(2, 1), rational(12, 5)]);
        assert!(!pred.estimate()[0].zone.includes(&off));
        assert_eq!(pred.verdict(), 1);
    }

    #[test]
    fn verdict_flips_exactly_at_the_silent_deadline() {
        let n = normalize(&bundled("b.json")).unwrap();
        let l1 = n.ta.location_index("l1").unwrap();
        let mut early = Predictor::new(&n, 4).unwrap();
        early.step(rational(9, 5), None).unwrap();
        // the quiet branch is still explainable: switched late, first echo
        // not yet due
        assert!(early.estimate().iter().any(|s| s.location == l1));
        assert_eq!(early.verdict(), 0);
        early.step(rational(1, 5), None).unwrap();
        assert_eq!(early.verdict(), 1);

        let mut exact = Predictor::new(&n, 4).unwrap();
        exact.step(rational(2, 1), None).unwrap();
        assert_eq!(exact.verdict(), 1);
        assert!(exact.estimate().iter().all(|s| s.location != l1));
    }

    #[test]
    fn observing_the_echo_keeps_only_the_reset_branch() {
        let n = normalize(&bundled("b.json")).unwrap();
        let mut pred = Predictor::new(&n, 4).unwrap();
        pred.step(rational(1, 1), Some("a")).unwrap();
        let l1 = n.ta.location_index("l1").unwrap();
        assert_eq!(pred.estimate().len(), 1);
        assert_eq!(pred.estimate()[0].location, l1);
        let reset = point(2, &[rational(0, 1), rational(1, 1)]);
        assert!(pred.estimate()[0].zone.includes(&reset));
        let stale = point(2, &[rational(1, 2), rational(1, 1)]);
        assert!(!pred.estimate()[0].zone.includes(&stale));
        assert_eq!(pred.verdict(), 0);
    }

    #[test]
    fn zero_delay_steps_are_idempotent() {
        let n = normalize(&bundled("b.json")).unwrap();
        let mut pred = Predictor::new(&n, 4).unwrap();
        pred.step(rational(0, 1), None).unwrap();
        let snapshot: Vec<(usize, Zone)> =
            pred.estimate().iter().map(|s| (s.location, s.zone.clone())).collect();
        pred.step(rational(0, 1), None).unwrap();
        let again: Vec<(usize, Zone)> =
            pred.estimate().iter().map(|s| (s.location, s.zone.clone())).collect();
        assert_eq!(snapshot, again);
    }

    #[test]
    fn delay_only_trace_raises_the_alarm_at_two() {
        let a = bundled("b.json");
        let trace = TimedWord::new(vec![rational(3, 1)], vec![]).unwrap();
        let opts = PredictOptions { sampling: None, verify: false };
        let out = run_predictor(&a, 4, &opts, &trace).unwrap();
        let times: Vec<Rational> = out.points.iter().map(|p| p.time).collect();
        let verdicts: Vec<u8> = out.points.iter().map(|p| p.verdict).collect();
        assert_eq!(
            times,
            vec![rational(0, 1), rational(1, 1), rational(2, 1), rational(3, 1)]
        );
        assert_eq!(verdicts, vec![0, 0, 1, 1]);
        assert_eq!(out.first_alarm(), Some(rational(2, 1)));
        assert!(out.warning.is_none());
    }

    #[test]
    fn sampled_grid_raises_at_twelve_fifths() {
        let a = bundled("b.json");
        let trace = TimedWord::new(vec![rational(12, 5)], vec![]).unwrap();
        let opts = PredictOptions {
            sampling: Some(SamplingSpec::new(3, 5).unwrap()),
            verify: false,
        };
        let out = run_predictor(&a, 6, &opts, &trace).unwrap();
        let times: Vec<Rational> = out.points.iter().map(|p| p.time).collect();
        let verdicts: Vec<u8> = out.points.iter().map(|p| p.verdict).collect();
        assert_eq!(
            times,
            vec![
                rational(0, 1),
                rational(3, 5),
                rational(6, 5),
                rational(9, 5),
                rational(12, 5)
            ]
        );
        assert_eq!(verdicts, vec![0, 0, 0, 0, 1]);
        assert_eq!(out.period, rational(3, 5));
    }

    #[test]
    fn healthy_echoes_keep_the_alarm_quiet() {
        let a = bundled("b.json");
        let trace = TimedWord::new(
            vec![rational(3, 2), rational(1, 1), rational(1, 2)],
            vec!["a".into(), "a".into()],
        )
        .unwrap();
        let opts = PredictOptions { sampling: None, verify: false };
        let out = run_predictor(&a, 4, &opts, &trace).unwrap();
        let times: Vec<Rational> = out.points.iter().map(|p| p.time).collect();
        assert_eq!(
            times,
            vec![
                rational(0, 1),
                rational(1, 1),
                rational(3, 2),
                rational(2, 1),
                rational(5, 2),
                rational(3, 1)
            ]
        );
        assert!(out.points.iter().all(|p| p.verdict == 0));
    }

    #[test]
    fn stepped_model_alarms_between_its_observables() {
        let a = bundled("g_timed.json");
        let trace = TimedWord::new(
            vec![rational(1, 1), rational(2, 1), rational(1, 1)],
            vec!["a".into(), "c".into()],
        )
        .unwrap();
        let opts = PredictOptions { sampling: None, verify: false };
        let out = run_predictor(&a, 3, &opts, &trace).unwrap();
        let verdicts: Vec<u8> = out.points.iter().map(|p| p.verdict).collect();
        // rows at 0,1,2,3,4: the alarm leads the earliest fault (at 5) by 3
        assert_eq!(verdicts, vec![0, 0, 1, 1, 1]);
        assert_eq!(out.first_alarm(), Some(rational(2, 1)));
    }

    #[test]
    fn inconsistent_trace_names_the_failing_time() {
        let a = bundled("b.json");
        let trace = TimedWord::new(
            vec![rational(1, 2), rational(0, 1)],
            vec!["a".into()],
        )
        .unwrap();
        let opts = PredictOptions { sampling: None, verify: false };
        let err = run_predictor(&a, 4, &opts, &trace).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("inconsistent"), "{msg}");
        assert!(msg.contains("1/2"), "{msg}");
    }

    #[test]
    fn silence_past_the_deadline_is_inconsistent() {
        let a = bundled("b.json");
        // no echo for 17/2 time units has no fault-free explanation; the
        // failure sits in the trailing delay, past the last verdict row
        let trace = TimedWord::new(vec![rational(17, 2)], vec![]).unwrap();
        let opts = PredictOptions { sampling: None, verify: false };
        let err = run_predictor(&a, 4, &opts, &trace).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("inconsistent"), "{msg}");
        assert!(msg.contains("17/2"), "{msg}");
    }

    #[test]
    fn unknown_events_are_rejected_up_front() {
        let a = bundled("b.json");
        let trace = TimedWord::new(
            vec![rational(1, 1), rational(0, 1)],
            vec!["zz".into()],
        )
        .unwrap();
        let opts = PredictOptions { sampling: None, verify: false };
        let err = run_predictor(&a, 4, &opts, &trace).unwrap_err();
        assert!(err.to_string().contains("zz"));
    }

    #[test]
    fn warning_attached_when_the_bound_is_too_ambitious() {
        let a = bundled("b.json");
        let trace = TimedWord::new(vec![rational(1, 1)], vec![]).unwrap();
        let opts = PredictOptions { sampling: None, verify: true };
        let five = run_predictor(&a, 5, &opts, &trace).unwrap();
        assert!(five.warning.is_some());
        let four = run_predictor(&a, 4, &opts, &trace).unwrap();
        assert!(four.warning.is_none());
    }

    #[test]
    fn alarms_lead_every_simulated_fault_by_the_bound() {
        let a = bundled("b.json");
        let opts = PredictOptions { sampling: None, verify: false };
        for fault_at in [rational(6, 1), rational(13, 2), rational(8, 1)] {
            let trace = TimedWord::new(vec![fault_at], vec![]).unwrap();
            let out = run_predictor(&a, 4, &opts, &trace).unwrap();
            let alarm = out.first_alarm().expect("alarm before the fault");
            assert!(alarm <= fault_at - rational(4, 1));
        }
    }
}
