//! Region abstraction: the finite, exact quotient of clock valuations.
//!
//! A region records, per clock, the integer part clipped at that clock's
//! maximal constant and the ordering of the fractional parts; valuations in
//! the same region satisfy the same constraints and reach the same regions.
//! Granularity is per-clock (Behrmann et al.'s refinement of the classical
//! construction), which keeps the graph small when one clock carries a large
//! constant.
//!
//! Delay successors are single-step: a region steps to the unique next
//! region met when time advances.  Maximal regions (every clock beyond its
//! constant) have no delay successor; infinite behaviour is expected to show
//! up as discrete cycles, which matches the modelling assumption that
//! infinite runs keep producing observable events.

use std::collections::BTreeSet;
use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::timed::constraint::{Atom, ClockConstraint, Relation};
use crate::timed::ta::{Rational, TimedAutomaton};

/// Per-clock view of a region.
///
/// `Frac.rank` orders the nonzero fractional parts across clocks: rank 0 is
/// the smallest fraction present, ranks are contiguous, and equal ranks mean
/// equal fractions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ClockStatus {
    /// Exactly the integer `at`.
    At(u64),
    /// Strictly between `int` and `int + 1`.
    Frac { int: u64, rank: usize },
    /// Strictly above the clock's maximal constant.
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Region {
    status: Vec<ClockStatus>,
}

impl Region {
    /// The all-zero region (every clock at 0).
    pub fn origin(clocks: usize) -> Region {
        Region { status: vec![ClockStatus::At(0); clocks] }
    }

    pub fn status(&self, clock: usize) -> ClockStatus {
        self.status[clock]
    }

    /// Region of a concrete rational valuation.
    pub fn of_valuation(values: &[Rational], max: &[u64]) -> Region {
        assert_eq!(values.len(), max.len());
        let mut fracs: Vec<(Rational, usize)> = Vec::new();
        let status = values
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let int = v.floor().to_integer() as u64;
                let frac = v - v.floor();
                if int > max[i] || (int == max[i] && frac != Rational::from_integer(0)) {
                    ClockStatus::Unbounded
                } else if frac == Rational::from_integer(0) {
                    ClockStatus::At(int)
                } else {
                    fracs.push((frac, i));
                    ClockStatus::Frac { int, rank: 0 }
                }
            })
            .collect();
        let mut region = Region { status };
        fracs.sort();
        let mut rank = 0usize;
        let mut prev: Option<Rational> = None;
        for (f, i) in fracs {
            if prev.is_some_and(|p| p < f) {
                rank += 1;
            }
            if let ClockStatus::Frac { int, .. } = region.status[i] {
                region.status[i] = ClockStatus::Frac { int, rank };
            }
            prev = Some(f);
        }
        region
    }

    /// A canonical valuation inside the region, for concretization: integer
    /// clocks take their integer, rank `r` of `m` classes takes `(r+1)/(m+1)`
    /// above its integer part, unbounded clocks take their constant plus one.
    pub fn sample_valuation(&self, max: &[u64]) -> Vec<Rational> {
        let classes = self.fraction_classes();
        self.status
            .iter()
            .enumerate()
            .map(|(i, s)| match s {
                ClockStatus::At(k) => Rational::from_integer(*k as i64),
                ClockStatus::Frac { int, rank } => {
                    Rational::from_integer(*int as i64)
                        + Rational::new((rank + 1) as i64, (classes + 1) as i64)
                }
                ClockStatus::Unbounded => Rational::from_integer(max[i] as i64 + 1),
            })
            .collect()
    }

    fn fraction_classes(&self) -> usize {
        self.status
            .iter()
            .filter_map(|s| match s {
                ClockStatus::Frac { rank, .. } => Some(rank + 1),
                _ => None,
            })
            .max()
            .unwrap_or(0)
    }

    fn canonicalize(&mut self) {
        let mut ranks: Vec<usize> = self
            .status
            .iter()
            .filter_map(|s| match s {
                ClockStatus::Frac { rank, .. } => Some(*rank),
                _ => None,
            })
            .collect();
        ranks.sort_unstable();
        ranks.dedup();
        for s in &mut self.status {
            if let ClockStatus::Frac { int, rank } = s {
                let new = ranks.binary_search(rank).expect("rank present");
                *s = ClockStatus::Frac { int: *int, rank: new };
            }
        }
    }

    /// Whether every valuation of the region satisfies `atom`.  Regions
    /// never split an atom whose constant is within the clock's maximal
    /// constant, so this is also "some valuation satisfies it".
    pub fn satisfies_atom(&self, clock: usize, atom_rel: Relation, constant: u64) -> bool {
        match self.status[clock] {
            ClockStatus::At(k) => match atom_rel {
                Relation::Lt => k < constant,
                Relation::Le => k <= constant,
                Relation::Eq => k == constant,
                Relation::Ge => k >= constant,
                Relation::Gt => k > constant,
            },
            ClockStatus::Frac { int, .. } => match atom_rel {
                Relation::Lt | Relation::Le => int + 1 <= constant,
                Relation::Eq => false,
                Relation::Ge | Relation::Gt => constant <= int,
            },
            ClockStatus::Unbounded => matches!(atom_rel, Relation::Ge | Relation::Gt),
        }
    }

    pub fn satisfies(
        &self,
        c: &ClockConstraint,
        resolve: impl Fn(&str) -> Option<usize>,
    ) -> bool {
        c.atoms.iter().all(|Atom { clock, rel, constant }| {
            resolve(clock).is_some_and(|i| self.satisfies_atom(i, *rel, *constant))
        })
    }

    /// Region after resetting `clock` to zero.
    pub fn reset(&self, clock: usize) -> Region {
        let mut out = self.clone();
        out.status[clock] = ClockStatus::At(0);
        out.canonicalize();
        out
    }

    /// The immediate time successor, or `None` on maximal regions.
    ///
    /// If some clock sits on an integer, all such clocks move into fresh
    /// smallest fractions (or beyond their constant).  Otherwise the largest
    /// fraction class reaches the next integer.
    pub fn delay(&self, max: &[u64]) -> Option<Region> {
        let mut out = self.clone();
        let on_int: Vec<usize> = (0..self.status.len())
            .filter(|&i| matches!(self.status[i], ClockStatus::At(_)))
            .collect();
        if !on_int.is_empty() {
            let mut opened = false;
            for &i in &on_int {
                let ClockStatus::At(k) = self.status[i] else { unreachable!() };
                if k < max[i] {
                    opened = true;
                    out.status[i] = ClockStatus::Frac { int: k, rank: usize::MAX };
                } else {
                    out.status[i] = ClockStatus::Unbounded;
                }
            }
            if opened {
                for s in &mut out.status {
                    if let ClockStatus::Frac { int, rank } = s {
                        *s = ClockStatus::Frac {
                            int: *int,
                            rank: if *rank == usize::MAX { 0 } else { *rank + 1 },
                        };
                    }
                }
            }
            out.canonicalize();
            return Some(out);
        }
        let top = self
            .status
            .iter()
            .filter_map(|s| match s {
                ClockStatus::Frac { rank, .. } => Some(*rank),
                _ => None,
            })
            .max()?;
        for s in &mut out.status {
            if let ClockStatus::Frac { int, rank } = s {
                if *rank == top {
                    *s = ClockStatus::At(*int + 1);
                }
            }
        }
        out.canonicalize();
        Some(out)
    }
}

/// Node of the region graph: a location with a region of its clocks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionNode {
    pub location: usize,
    pub region: Region,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegionMove {
    /// Time successor.
    Delay,
    /// Automaton edge, by index.
    Step(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegionEdge {
    pub src: usize,
    pub mv: RegionMove,
    pub dst: usize,
}

/// Reachable region graph of a timed automaton, built breadth-first with
/// stable node numbering.
#[derive(Debug, Clone)]
pub struct RegionGraph {
    pub nodes: Vec<RegionNode>,
    pub edges: Vec<RegionEdge>,
    /// `None` when the initial valuation violates the initial invariant.
    pub initial: Option<usize>,
    pub repeated: BTreeSet<usize>,
}

const REGION_NODE_CAP: usize = 5_000_000;

pub fn region_graph(a: &TimedAutomaton) -> Result<RegionGraph> {
    let max = a.max_constants();
    let resolve = |r: &Region, c: &ClockConstraint| -> bool {
        r.satisfies(c, |name| a.clock_index(name))
    };
    let mut nodes: Vec<RegionNode> = Vec::new();
    let mut index: HashMap<(usize, Region), usize> = HashMap::new();
    let mut edges = Vec::new();

    let origin = Region::origin(a.clocks.len());
    let initial = if resolve(&origin, &a.invariants[a.initial]) {
        index.insert((a.initial, origin.clone()), 0);
        nodes.push(RegionNode { location: a.initial, region: origin });
        Some(0)
    } else {
        None
    };

    let mut frontier = 0;
    while frontier < nodes.len() {
        if nodes.len() > REGION_NODE_CAP {
            return Err(Error::internal(format!(
                "region graph exceeds {REGION_NODE_CAP} nodes"
            )));
        }
        let RegionNode { location, region } = nodes[frontier].clone();
        let src = frontier;
        frontier += 1;

        let intern =
            |nodes: &mut Vec<RegionNode>,
             index: &mut HashMap<(usize, Region), usize>,
             loc: usize,
             r: Region| {
                *index.entry((loc, r.clone())).or_insert_with(|| {
                    nodes.push(RegionNode { location: loc, region: r });
                    nodes.len() - 1
                })
            };

        for (ei, e) in a.edges.iter().enumerate().filter(|(_, e)| e.src == location) {
            if !resolve(&region, &e.guard) {
                continue;
            }
            let mut r = region.clone();
            for &c in &e.resets {
                r = r.reset(c);
            }
            if !resolve(&r, &a.invariants[e.dst]) {
                continue;
            }
            let dst = intern(&mut nodes, &mut index, e.dst, r);
            edges.push(RegionEdge { src, mv: RegionMove::Step(ei), dst });
        }
        if let Some(r) = region.delay(&max) {
            if resolve(&r, &a.invariants[location]) {
                let dst = intern(&mut nodes, &mut index, location, r);
                edges.push(RegionEdge { src, mv: RegionMove::Delay, dst });
            }
        }
    }

    let repeated = nodes
        .iter()
        .enumerate()
        .filter(|(_, n)| a.repeated.contains(&n.location))
        .map(|(i, _)| i)
        .collect();
    Ok(RegionGraph { nodes, edges, initial, repeated })
}

/// Accepting lasso: edge-index paths for the stem and the (nonempty) cycle.
#[derive(Debug, Clone)]
pub struct RegionLasso {
    pub stem: Vec<usize>,
    pub cycle: Vec<usize>,
}

/// Finds a reachable cycle through a repeated node, or `None` when the
/// accepted language of infinite words is empty.  Decided on the strongly
/// connected components of the (already reachable-only) graph.
pub fn buchi_lasso(g: &RegionGraph) -> Option<RegionLasso> {
    let initial = g.initial?;
    let mut pg = petgraph::graph::DiGraph::<(), usize>::new();
    let nodes: Vec<_> = (0..g.nodes.len()).map(|_| pg.add_node(())).collect();
    for (ei, e) in g.edges.iter().enumerate() {
        pg.add_edge(nodes[e.src], nodes[e.dst], ei);
    }
    let sccs = petgraph::algo::tarjan_scc(&pg);
    let mut comp = vec![usize::MAX; g.nodes.len()];
    for (ci, scc) in sccs.iter().enumerate() {
        for n in scc {
            comp[n.index()] = ci;
        }
    }
    // smallest repeated node sitting on any cycle
    let target = (0..g.nodes.len())
        .filter(|&n| g.repeated.contains(&n))
        .find(|&n| {
            sccs[comp[n]].len() > 1 || g.edges.iter().any(|e| e.src == n && e.dst == n)
        })?;

    // stem: breadth-first from the initial node to the target
    let stem = bfs_path(g, initial, |n| n == target, |_| true)?;
    // cycle: from the target back to itself staying inside its component
    let ci = comp[target];
    let cycle = bfs_cycle(g, target, |n| comp[n] == ci)?;
    Some(RegionLasso { stem, cycle })
}

fn bfs_path(
    g: &RegionGraph,
    from: usize,
    is_target: impl Fn(usize) -> bool,
    allowed: impl Fn(usize) -> bool,
) -> Option<Vec<usize>> {
    if is_target(from) {
        return Some(Vec::new());
    }
    let mut parent: Vec<Option<(usize, usize)>> = vec![None; g.nodes.len()];
    let mut seen = vec![false; g.nodes.len()];
    seen[from] = true;
    let mut queue = std::collections::VecDeque::from([from]);
    while let Some(q) = queue.pop_front() {
        for (ei, e) in g.edges.iter().enumerate().filter(|(_, e)| e.src == q) {
            if seen[e.dst] || !allowed(e.dst) {
                continue;
            }
            seen[e.dst] = true;
            parent[e.dst] = Some((q, ei));
            if is_target(e.dst) {
                let mut path = Vec::new();
                let mut cur = e.dst;
                while let Some((p, pe)) = parent[cur] {
                    path.push(pe);
                    cur = p;
                }
                path.reverse();
                return Some(path);
            }
            queue.push_back(e.dst);
        }
    }
    None
}

/// Shortest nonempty cycle from `at` back to itself through `allowed` nodes.
fn bfs_cycle(g: &RegionGraph, at: usize, allowed: impl Fn(usize) -> bool) -> Option<Vec<usize>> {
    // first step by hand so the empty path is never returned
    for (ei, e) in g.edges.iter().enumerate().filter(|(_, e)| e.src == at) {
        if e.dst == at {
            return Some(vec![ei]);
        }
        if !allowed(e.dst) {
            continue;
        }
        if let Some(rest) = bfs_path(g, e.dst, |n| n == at, &allowed) {
            let mut cycle = vec![ei];
            cycle.extend(rest);
            return Some(cycle);
        }
    }
    None
}
