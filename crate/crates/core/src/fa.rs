//! Finite automata over partitioned alphabets and the graph primitives the
//! untimed predictability check is built from: synchronous product with
//! silent interleaving, hiding of unobservable events, fault-enabled states
//! and backward step distances to them.

use std::collections::{BTreeSet, VecDeque};

use crate::alphabet::{EventAlphabet, Label};
use crate::error::{Error, Result};

/// Distance value for [`backward_distance_df`]: number of steps, or
/// unreachable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Dist {
    Steps(u32),
    Infinite,
}

impl Dist {
    pub fn is_finite(self) -> bool {
        matches!(self, Dist::Steps(_))
    }

    pub fn steps(self) -> Option<u32> {
        match self {
            Dist::Steps(n) => Some(n),
            Dist::Infinite => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FaEdge {
    pub src: usize,
    pub label: Label,
    pub dst: usize,
}

/// Finite automaton with named locations kept in declaration order.
///
/// `final_states` is used for finite-word acceptance, `repeated` for infinite
/// words; either may be empty.  Locations are addressed by index, with names
/// kept for diagnostics and exports.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiniteAutomaton {
    pub locations: Vec<String>,
    pub initial: usize,
    pub alphabet: EventAlphabet,
    pub edges: Vec<FaEdge>,
    pub final_states: BTreeSet<usize>,
    pub repeated: BTreeSet<usize>,
}

/// Finite word over the event set together with the number of run steps
/// (silent steps included) that produced it, so `duration >= events.len()`.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct UntimedWord {
    pub events: Vec<String>,
    pub duration: usize,
}

impl UntimedWord {
    pub fn new(events: Vec<String>, duration: usize) -> Self {
        debug_assert!(duration >= events.len());
        UntimedWord { events, duration }
    }

    pub fn empty() -> Self {
        UntimedWord { events: Vec::new(), duration: 0 }
    }
}

impl FiniteAutomaton {
    pub fn location_index(&self, name: &str) -> Option<usize> {
        self.locations.iter().position(|l| l == name)
    }

    pub fn location_name(&self, idx: usize) -> &str {
        &self.locations[idx]
    }

    /// Outgoing edges of `loc` in declaration order.
    pub fn edges_from(&self, loc: usize) -> impl Iterator<Item = (usize, &FaEdge)> {
        self.edges
            .iter()
            .enumerate()
            .filter(move |(_, e)| e.src == loc)
    }

    fn is_fault_edge(&self, e: &FaEdge) -> bool {
        self.alphabet.is_fault(&e.label)
    }

    /// Locations reachable from the initial one, in BFS order.
    pub fn forward_reachable(&self) -> Vec<usize> {
        self.reachable_from(&[self.initial], false)
    }

    /// Locations reachable from `sources` (forward, or backward over the
    /// transposed graph), in BFS order over declaration-ordered edges.
    pub fn reachable_from(&self, sources: &[usize], backward: bool) -> Vec<usize> {
        let mut seen = vec![false; self.locations.len()];
        let mut order = Vec::new();
        let mut queue = VecDeque::new();
        for &s in sources {
            if !seen[s] {
                seen[s] = true;
                order.push(s);
                queue.push_back(s);
            }
        }
        while let Some(q) = queue.pop_front() {
            for e in &self.edges {
                let (from, to) = if backward { (e.dst, e.src) } else { (e.src, e.dst) };
                if from == q && !seen[to] {
                    seen[to] = true;
                    order.push(to);
                    queue.push_back(to);
                }
            }
        }
        order
    }

    /// Drops locations not forward-reachable, remapping indices.
    pub fn prune_unreachable(&self) -> FiniteAutomaton {
        let keep = self.forward_reachable();
        self.restrict_to(&keep)
    }

    /// Sub-automaton induced by `keep` (which must contain the initial
    /// location); edges with an endpoint outside `keep` are dropped.
    pub fn restrict_to(&self, keep: &[usize]) -> FiniteAutomaton {
        let mut map = vec![usize::MAX; self.locations.len()];
        for (new, &old) in keep.iter().enumerate() {
            map[old] = new;
        }
        assert!(map[self.initial] != usize::MAX, "initial location dropped");
        FiniteAutomaton {
            locations: keep.iter().map(|&i| self.locations[i].clone()).collect(),
            initial: map[self.initial],
            alphabet: self.alphabet.clone(),
            edges: self
                .edges
                .iter()
                .filter(|e| map[e.src] != usize::MAX && map[e.dst] != usize::MAX)
                .map(|e| FaEdge { src: map[e.src], label: e.label.clone(), dst: map[e.dst] })
                .collect(),
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

    /// Copy without fault-labeled edges.
    pub fn without_fault_edges(&self) -> FiniteAutomaton {
        let mut out = self.clone();
        out.edges.retain(|e| !self.is_fault_edge(e));
        out
    }
}

/// Relabels every edge whose event is not observable to the silent label.
/// The alphabet itself is unchanged, so hiding is idempotent.
pub fn hide_unobservable(a: &FiniteAutomaton) -> FiniteAutomaton {
    let mut out = a.clone();
    for e in &mut out.edges {
        if !a.alphabet.label_observable(&e.label) {
            e.label = Label::Silent;
        }
    }
    out
}

/// Locations with at least one outgoing fault-labeled edge.
pub fn fault_enabled_states(a: &FiniteAutomaton) -> BTreeSet<usize> {
    a.edges
        .iter()
        .filter(|e| a.alphabet.is_fault(&e.label))
        .map(|e| e.src)
        .collect()
}

/// For every location, the least number of non-fault steps to a
/// fault-enabled location (0 on fault-enabled locations themselves).
/// Computed by breadth-first search on the edge-reversed graph; fault edges
/// do not count as steps and are excluded.
pub fn backward_distance_df(a: &FiniteAutomaton) -> Vec<Dist> {
    let mut dist = vec![Dist::Infinite; a.locations.len()];
    let mut queue = VecDeque::new();
    for &s in &fault_enabled_states(a) {
        dist[s] = Dist::Steps(0);
        queue.push_back(s);
    }
    while let Some(q) = queue.pop_front() {
        let d = match dist[q] {
            Dist::Steps(d) => d,
            Dist::Infinite => unreachable!(),
        };
        for e in &a.edges {
            if e.dst == q && !a.alphabet.is_fault(&e.label) && dist[e.src] == Dist::Infinite {
                dist[e.src] = Dist::Steps(d + 1);
                queue.push_back(e.src);
            }
        }
    }
    dist
}

/// Product automaton together with provenance: the component pair behind
/// each product location and the component edge indices behind each product
/// edge (`None` on the side that did not move).
#[derive(Debug, Clone)]
pub struct FaProduct {
    pub fa: FiniteAutomaton,
    pub pairs: Vec<(usize, usize)>,
    pub edge_src: Vec<(Option<usize>, Option<usize>)>,
}

/// Product of `a` and `b`: shared events synchronize, silent steps
/// interleave.  Only pairs reachable from the initial pair are materialized,
/// named `"(p,q)"`.  Final pairs are those final on both sides; repeated
/// pairs are those repeated on the left, which realizes the infinite-word
/// intersection exactly when every right-hand location is repeated (the only
/// configuration the predictability constructions produce).
pub fn fa_product(a: &FiniteAutomaton, b: &FiniteAutomaton) -> Result<FiniteAutomaton> {
    Ok(fa_product_full(a, b)?.fa)
}

pub fn fa_product_full(a: &FiniteAutomaton, b: &FiniteAutomaton) -> Result<FaProduct> {
    if a.alphabet != b.alphabet {
        return Err(Error::input("product of automata over different alphabets"));
    }
    let mut pairs: Vec<(usize, usize)> = vec![(a.initial, b.initial)];
    let mut index_of = std::collections::HashMap::new();
    index_of.insert((a.initial, b.initial), 0usize);
    let mut edges = Vec::new();
    let mut edge_src: Vec<(Option<usize>, Option<usize>)> = Vec::new();
    let mut frontier = 0;
    while frontier < pairs.len() {
        let (p, q) = pairs[frontier];
        let src = frontier;
        frontier += 1;
        let mut push = |pairs: &mut Vec<(usize, usize)>,
                        index_of: &mut std::collections::HashMap<(usize, usize), usize>,
                        label: Label,
                        dst: (usize, usize),
                        from: (Option<usize>, Option<usize>)| {
            let di = *index_of.entry(dst).or_insert_with(|| {
                pairs.push(dst);
                pairs.len() - 1
            });
            edges.push(FaEdge { src, label, dst: di });
            edge_src.push(from);
        };
        for (ia, ea) in a.edges.iter().enumerate().filter(|(_, e)| e.src == p) {
            match &ea.label {
                Label::Silent => {
                    push(&mut pairs, &mut index_of, Label::Silent, (ea.dst, q), (Some(ia), None));
                }
                Label::Event(ev) => {
                    for (ib, eb) in b.edges.iter().enumerate().filter(|(_, e)| e.src == q) {
                        if eb.label == ea.label {
                            push(
                                &mut pairs,
                                &mut index_of,
                                Label::event(ev.clone()),
                                (ea.dst, eb.dst),
                                (Some(ia), Some(ib)),
                            );
                        }
                    }
                }
            }
        }
        for (ib, eb) in b
            .edges
            .iter()
            .enumerate()
            .filter(|(_, e)| e.src == q && e.label.is_silent())
        {
            push(&mut pairs, &mut index_of, Label::Silent, (p, eb.dst), (None, Some(ib)));
        }
    }
    let locations: Vec<String> = pairs
        .iter()
        .map(|&(p, q)| format!("({},{})", a.locations[p], b.locations[q]))
        .collect();
    let final_states = pairs
        .iter()
        .enumerate()
        .filter(|(_, &(p, q))| a.final_states.contains(&p) && b.final_states.contains(&q))
        .map(|(i, _)| i)
        .collect();
    let repeated = pairs
        .iter()
        .enumerate()
        .filter(|(_, &(p, _))| a.repeated.contains(&p))
        .map(|(i, _)| i)
        .collect();
    let fa = FiniteAutomaton {
        locations,
        initial: 0,
        alphabet: a.alphabet.clone(),
        edges,
        final_states,
        repeated,
    };
    Ok(FaProduct { fa, pairs, edge_src })
}
