//! Forward zone graph with maximum-bounds extrapolation and a Büchi
//! emptiness check over it.
//!
//! Nodes are pairs of a location and a delay-closed, extrapolated zone,
//! deduplicated by exact (canonical) equality — no inclusion subsumption, so
//! cycles in the graph correspond to genuinely repeatable symbolic steps.
//! Zones stay exponentially coarser than regions, which keeps products with
//! many clocks tractable where a region graph explodes.

use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeSet, HashMap, VecDeque};
use std::hash::{Hash, Hasher};

use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};

use crate::error::{Error, Result};
use crate::timed::ta::TimedAutomaton;
use crate::timed::zone::Zone;

const ZONE_NODE_CAP: usize = 200_000;

/// Accepting lasso through the zone graph, as automaton edge indices: the
/// run takes the stem once, then repeats the cycle forever.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ZoneLasso {
    pub stem: Vec<usize>,
    pub cycle: Vec<usize>,
}

struct ZoneGraph {
    /// (location, zone) per node; node 0 is initial when present.
    nodes: Vec<(usize, Zone)>,
    /// (source node, automaton edge, target node).
    edges: Vec<(usize, usize, usize)>,
}

fn node_key(loc: usize, z: &Zone) -> u64 {
    let mut h = DefaultHasher::new();
    loc.hash(&mut h);
    z.hash(&mut h);
    h.finish()
}

fn explore(a: &TimedAutomaton) -> Result<Option<ZoneGraph>> {
    let resolve = |name: &str| a.clock_index(name);
    let max: Vec<Option<i64>> =
        a.max_constants().iter().map(|&c| Some(c as i64)).collect();
    let close = |loc: usize, z: &mut Zone| {
        z.up();
        z.and_constraint(&a.invariants[loc], resolve);
        z.extrapolate(&max);
    };

    let mut start = Zone::zero(a.clocks.len());
    if !start.and_constraint(&a.invariants[a.initial], resolve) || start.is_empty() {
        return Ok(None);
    }
    close(a.initial, &mut start);

    let mut outgoing: Vec<Vec<usize>> = vec![Vec::new(); a.locations.len()];
    for (ei, e) in a.edges.iter().enumerate() {
        outgoing[e.src].push(ei);
    }

    // hash-bucketed node ids; candidates are confirmed by exact equality
    let mut index: HashMap<u64, Vec<usize>> = HashMap::new();
    index.entry(node_key(a.initial, &start)).or_default().push(0);
    let mut graph = ZoneGraph { nodes: vec![(a.initial, start)], edges: Vec::new() };
    let mut queue = VecDeque::from([0usize]);
    while let Some(n) = queue.pop_front() {
        let (loc, zone) = graph.nodes[n].clone();
        for (ei, e) in outgoing[loc].iter().map(|&ei| (ei, &a.edges[ei])) {
            let mut s = zone.clone();
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
            if s.is_empty() {
                continue;
            }
            let bucket = index.entry(node_key(e.dst, &s)).or_default();
            let id = match bucket
                .iter()
                .find(|&&i| graph.nodes[i].0 == e.dst && graph.nodes[i].1 == s)
            {
                Some(&i) => i,
                None => {
                    let i = graph.nodes.len();
                    if i >= ZONE_NODE_CAP {
                        return Err(Error::internal(format!(
                            "zone graph exceeds {ZONE_NODE_CAP} nodes"
                        )));
                    }
                    graph.nodes.push((e.dst, s));
                    bucket.push(i);
                    queue.push_back(i);
                    i
                }
            };
            graph.edges.push((n, ei, id));
        }
    }
    Ok(Some(graph))
}

/// Shortest edge path from `from` to a node satisfying `done`, restricted to
/// graph edges allowed by `usable`.  Returns automaton edge indices.
fn bfs_path(
    g: &ZoneGraph,
    adj: &[Vec<usize>],
    from: &[usize],
    done: impl Fn(usize) -> bool,
    usable: impl Fn(usize) -> bool,
) -> Option<(usize, Vec<usize>)> {
    let mut pred: Vec<Option<(usize, usize)>> = vec![None; g.nodes.len()];
    let mut seen: Vec<bool> = vec![false; g.nodes.len()];
    let mut queue: VecDeque<usize> = VecDeque::new();
    for &s in from {
        if !seen[s] {
            seen[s] = true;
            queue.push_back(s);
        }
    }
    while let Some(n) = queue.pop_front() {
        if done(n) {
            let mut path = Vec::new();
            let mut cur = n;
            while let Some((p, ei)) = pred[cur] {
                path.push(ei);
                cur = p;
            }
            path.reverse();
            return Some((n, path));
        }
        for &gi in &adj[n] {
            let (_, ei, dst) = g.edges[gi];
            if usable(gi) && !seen[dst] {
                seen[dst] = true;
                pred[dst] = Some((n, ei));
                queue.push_back(dst);
            }
        }
    }
    None
}

/// Accepting lasso of the zone graph, or `None` when no run visits a
/// repeated location infinitely often.
pub fn buchi_lasso_zones(a: &TimedAutomaton) -> Result<Option<ZoneLasso>> {
    if a.repeated.is_empty() {
        return Ok(None);
    }
    let Some(g) = explore(a)? else {
        return Ok(None);
    };
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); g.nodes.len()];
    for (gi, &(src, _, _)) in g.edges.iter().enumerate() {
        adj[src].push(gi);
    }
    let mut pg: DiGraph<(), ()> = DiGraph::new();
    let idx: Vec<NodeIndex> = g.nodes.iter().map(|_| pg.add_node(())).collect();
    for &(src, _, dst) in &g.edges {
        pg.add_edge(idx[src], idx[dst], ());
    }
    let mut comp = vec![usize::MAX; g.nodes.len()];
    for (ci, scc) in tarjan_scc(&pg).into_iter().enumerate() {
        for n in scc {
            comp[n.index()] = ci;
        }
    }
    let cyclic: BTreeSet<usize> = g
        .edges
        .iter()
        .filter(|&&(src, _, dst)| comp[src] == comp[dst])
        .map(|&(src, _, _)| comp[src])
        .collect();

    let accepting =
        |n: usize| a.repeated.contains(&g.nodes[n].0) && cyclic.contains(&comp[n]);
    let Some((anchor, stem)) = bfs_path(&g, &adj, &[0], accepting, |_| true) else {
        return Ok(None);
    };
    // close the cycle strictly inside the anchor's component
    let internal = |gi: usize| {
        let (src, _, dst) = g.edges[gi];
        comp[src] == comp[anchor] && comp[dst] == comp[anchor]
    };
    let starts: Vec<(usize, usize)> = adj[anchor]
        .iter()
        .filter(|&&gi| internal(gi))
        .map(|&gi| (g.edges[gi].2, g.edges[gi].1))
        .collect();
    for (first_dst, first_ei) in starts {
        if first_dst == anchor {
            return Ok(Some(ZoneLasso { stem, cycle: vec![first_ei] }));
        }
        if let Some((_, mut rest)) =
            bfs_path(&g, &adj, &[first_dst], |n| n == anchor, internal)
        {
            let mut cycle = vec![first_ei];
            cycle.append(&mut rest);
            return Ok(Some(ZoneLasso { stem, cycle }));
        }
    }
    Err(Error::internal("cyclic component lost its cycle"))
}
