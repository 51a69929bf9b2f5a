//! Directed communication graphs and their connectivity analysis.
//!
//! Nodes are labeled `1..=n`. An arc `(k, l)` means that agent `k` sends
//! to agent `l`, so `k` is a neighbor of `l`.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schedule::GraphSchedule;

/// Largest node count accepted by [`weakly_connected_oracle`].
pub const ORACLE_MAX_NODES: usize = 12;

/// A directed graph without self-loops on the nodes `1..=n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DirectedGraph {
    n: usize,
    arcs: BTreeSet<(usize, usize)>,
}

impl DirectedGraph {
    pub fn new(n: usize, arcs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("a graph needs at least one node"));
        }
        let mut set = BTreeSet::new();
        for (k, l) in arcs {
            if k == l {
                return Err(Error::invalid(format!("self-loop ({k},{k}) is not allowed")));
            }
            if k == 0 || l == 0 || k > n || l > n {
                return Err(Error::invalid(format!("arc ({k},{l}) has a label outside 1..={n}")));
            }
            set.insert((k, l));
        }
        Ok(DirectedGraph { n, arcs: set })
    }

    /// The graph on `n` nodes with no arcs.
    pub fn empty(n: usize) -> Result<Self> {
        Self::new(n, [])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn arcs(&self) -> &BTreeSet<(usize, usize)> {
        &self.arcs
    }

    pub fn arc_count(&self) -> usize {
        self.arcs.len()
    }

    pub fn has_arc(&self, k: usize, l: usize) -> bool {
        self.arcs.contains(&(k, l))
    }

    pub fn nodes(&self) -> impl Iterator<Item = usize> {
        1..=self.n
    }

    /// Nodes `i` with an arc `(i, k)`: the agents whose state `k` receives.
    pub fn in_neighbors(&self, k: usize) -> impl Iterator<Item = usize> + '_ {
        self.arcs.iter().filter(move |&&(_, l)| l == k).map(|&(i, _)| i)
    }

    pub fn out_neighbors(&self, k: usize) -> impl Iterator<Item = usize> + '_ {
        self.arcs.range((k, 0)..(k + 1, 0)).map(|&(_, l)| l)
    }

    /// `{k} ∪ Neighbors(k)`, sorted.
    pub fn closed_neighborhood(&self, k: usize) -> Vec<usize> {
        let mut set: BTreeSet<usize> = self.in_neighbors(k).collect();
        set.insert(k);
        set.into_iter().collect()
    }

    /// Union of two arc sets on the same node set.
    pub fn union(&self, other: &DirectedGraph) -> Result<DirectedGraph> {
        if self.n != other.n {
            return Err(Error::invalid(format!("cannot unite graphs with {} and {} nodes", self.n, other.n)));
        }
        let mut arcs = self.arcs.clone();
        arcs.extend(other.arcs.iter().copied());
        Ok(DirectedGraph { n: self.n, arcs })
    }

    /// Relabels node `k` as `perm[k - 1]`. `perm` must be a permutation of `1..=n`.
    pub fn relabel(&self, perm: &[usize]) -> Result<DirectedGraph> {
        check_permutation(perm, self.n)?;
        DirectedGraph::new(self.n, self.arcs.iter().map(|&(k, l)| (perm[k - 1], perm[l - 1])))
    }

    fn check_node(&self, k: usize) -> Result<()> {
        if k == 0 || k > self.n {
            Err(Error::invalid(format!("node {k} is outside 1..={}", self.n)))
        } else {
            Ok(())
        }
    }
}

impl fmt::Display for DirectedGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n={} {{", self.n)?;
        for (i, (k, l)) in self.arcs.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "({k},{l})")?;
        }
        write!(f, "}}")
    }
}

pub(crate) fn check_permutation(perm: &[usize], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    if perm.len() != n {
        return Err(Error::invalid(format!("permutation has {} entries, expected {n}", perm.len())));
    }
    for &p in perm {
        if p == 0 || p > n || seen[p - 1] {
            return Err(Error::invalid("not a permutation of 1..=n"));
        }
        seen[p - 1] = true;
    }
    Ok(())
}

/// A set of node labels.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NodeSet(BTreeSet<usize>);

impl NodeSet {
    pub fn new() -> Self {
        NodeSet(BTreeSet::new())
    }

    pub fn all(n: usize) -> Self {
        (1..=n).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn contains(&self, k: usize) -> bool {
        self.0.contains(&k)
    }

    pub fn insert(&mut self, k: usize) -> bool {
        self.0.insert(k)
    }

    pub fn first(&self) -> Option<usize> {
        self.0.first().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn union(&self, other: &NodeSet) -> NodeSet {
        self.0.union(&other.0).copied().collect()
    }

    pub fn is_disjoint(&self, other: &NodeSet) -> bool {
        self.0.is_disjoint(&other.0)
    }
}

impl FromIterator<usize> for NodeSet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        NodeSet(iter.into_iter().collect())
    }
}

impl fmt::Display for NodeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, k) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{k}")?;
        }
        write!(f, "}}")
    }
}

/// A discrete time interval `[start, end]`, or `[start, ∞)` when `end` is `None`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntervalSpec {
    pub start: u64,
    pub end: Option<u64>,
}

impl IntervalSpec {
    pub fn bounded(start: u64, end: u64) -> Result<Self> {
        if start > end {
            return Err(Error::invalid(format!("interval [{start},{end}] is empty")));
        }
        Ok(IntervalSpec { start, end: Some(end) })
    }

    pub fn unbounded(start: u64) -> Self {
        IntervalSpec { start, end: None }
    }

    pub fn is_bounded(&self) -> bool {
        self.end.is_some()
    }
}

impl fmt::Display for IntervalSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.end {
            Some(end) => write!(f, "[{},{}]", self.start, end),
            None => write!(f, "[{},inf)", self.start),
        }
    }
}

/// Nodes outside `set` having an arc into `set`.
pub fn neighbors(set: &NodeSet, graph: &DirectedGraph) -> Result<NodeSet> {
    if set.is_empty() {
        return Err(Error::invalid("neighbors of an empty node set are undefined"));
    }
    for k in set.iter() {
        graph.check_node(k)?;
    }
    Ok(graph.arcs.iter().filter(|&&(k, l)| set.contains(l) && !set.contains(k)).map(|&(k, _)| k).collect())
}

/// Nodes reachable from `k` along arcs, `k` included.
fn reachable_from(graph: &DirectedGraph, k: usize) -> Vec<bool> {
    let mut seen = vec![false; graph.n + 1];
    let mut queue = VecDeque::from([k]);
    seen[k] = true;
    while let Some(u) = queue.pop_front() {
        for v in graph.out_neighbors(u) {
            if !seen[v] {
                seen[v] = true;
                queue.push_back(v);
            }
        }
    }
    seen
}

/// Whether every node is reachable from `k`.
pub fn is_connected_from(graph: &DirectedGraph, k: usize) -> Result<bool> {
    graph.check_node(k)?;
    Ok(reachable_from(graph, k)[1..].iter().all(|&r| r))
}

/// All nodes that are connected to every other node.
pub fn roots(graph: &DirectedGraph) -> NodeSet {
    graph.nodes().filter(|&k| reachable_from(graph, k)[1..].iter().all(|&r| r)).collect()
}

/// Whether some node is connected to all other nodes.
pub fn is_weakly_connected(graph: &DirectedGraph) -> bool {
    graph.nodes().any(|k| reachable_from(graph, k)[1..].iter().all(|&r| r))
}

/// Decides weak connectivity through the subset characterization: the graph is
/// weakly connected iff every ordered pair of nonempty disjoint node sets has
/// at least one nonempty neighbor set.
///
/// Exhaustive over `3^n` set pairs, hence the cap at [`ORACLE_MAX_NODES`].
pub fn weakly_connected_oracle(graph: &DirectedGraph) -> Result<bool> {
    Ok(disconnecting_pair(graph)?.is_none())
}

/// A pair `(L1, L2)` witnessing failure of weak connectivity, if any.
pub fn disconnecting_pair(graph: &DirectedGraph) -> Result<Option<(NodeSet, NodeSet)>> {
    let n = graph.n;
    if n > ORACLE_MAX_NODES {
        return Err(Error::ResourceLimit(format!(
            "subset oracle is limited to {ORACLE_MAX_NODES} nodes, got {n}"
        )));
    }
    // in_mask[l]: bit k-1 set iff (k, l) is an arc
    let mut in_mask = vec![0u32; n + 1];
    for &(k, l) in &graph.arcs {
        in_mask[l] |= 1 << (k - 1);
    }
    let neighbor_mask = |set: u32| -> u32 {
        let mut acc = 0;
        for (l, mask) in in_mask.iter().enumerate().skip(1) {
            if set & (1 << (l - 1)) != 0 {
                acc |= mask;
            }
        }
        acc & !set
    };
    let full: u32 = if n == 32 { u32::MAX } else { (1 << n) - 1 };
    for l1 in 1..=full {
        let nb1 = neighbor_mask(l1);
        if nb1 != 0 {
            continue;
        }
        let rest = full & !l1;
        // every nonempty submask of the complement
        let mut l2 = rest;
        while l2 != 0 {
            if neighbor_mask(l2) == 0 {
                return Ok(Some((mask_to_set(l1, n), mask_to_set(l2, n))));
            }
            l2 = (l2 - 1) & rest;
        }
    }
    Ok(None)
}

fn mask_to_set(mask: u32, n: usize) -> NodeSet {
    (1..=n).filter(|k| mask & (1 << (k - 1)) != 0).collect()
}

/// Finds a node connected to all others by growing two disjoint families of
/// nodes `L1 ⊆ F1` and `L2 ⊆ F2`, where every node of `Li` reaches every node
/// of `Fi`. Each round picks a neighbor `m` of `L2` (or of `L1` when `L2` has
/// none) and either merges the families, opens a fresh family, or extends a
/// leader set. Returns `None` exactly when both neighbor sets run empty, which
/// certifies that the graph is not weakly connected.
///
/// Ties are broken towards the lowest label.
pub fn find_root(graph: &DirectedGraph) -> Option<usize> {
    let n = graph.n;
    if n == 1 {
        return Some(1);
    }
    let all = NodeSet::all(n);
    let mut l1: NodeSet = [1].into_iter().collect();
    let mut f1 = l1.clone();
    let mut l2: NodeSet = [2].into_iter().collect();
    let mut f2 = l2.clone();

    // Each non-final round grows |F1 ∪ F2| or |L1 ∪ L2|.
    for _ in 0..=2 * n * n {
        let nb2 = neighbors(&l2, graph).expect("leader sets are nonempty");
        let nb1 = neighbors(&l1, graph).expect("leader sets are nonempty");
        // `active` is the side whose neighbor was picked, `other` the opposite one.
        let (m, (l_other, f_other), (l_active, f_active)) = if let Some(m) = nb2.first() {
            (m, (&mut l1, &mut f1), (&mut l2, &mut f2))
        } else {
            (nb1.first()?, (&mut l2, &mut f2), (&mut l1, &mut f1))
        };

        let covered = f_other.union(f_active);
        if f_other.contains(m) {
            if covered == all {
                return l_other.first();
            }
            let fresh = all.iter().find(|&k| !covered.contains(k)).expect("coverage is incomplete");
            *f_other = covered;
            *l_active = [fresh].into_iter().collect();
            *f_active = l_active.clone();
        } else if !f_active.contains(m) {
            *l_active = [m].into_iter().collect();
            f_active.insert(m);
        } else {
            l_active.insert(m);
        }
    }
    unreachable!("root search exceeded its round bound")
}

/// Whether every arc has its reverse.
pub fn is_bidirectional(graph: &DirectedGraph) -> bool {
    graph.arcs.iter().all(|&(k, l)| graph.has_arc(l, k))
}

/// The graph whose arcs are all arcs of `schedule` at times in `interval`.
///
/// Unbounded intervals are answered only for schedules whose tail repeats
/// (periodic or eventually constant).
pub fn union_across(schedule: &GraphSchedule, interval: IntervalSpec) -> Result<DirectedGraph> {
    if interval.start < schedule.first_time() {
        return Err(Error::invalid(format!(
            "interval {interval} starts before the schedule's first time {}",
            schedule.first_time()
        )));
    }
    let (start, end) = match interval.end {
        Some(end) => (interval.start, end),
        None => {
            let (tail_start, tail_len) = schedule.recurrent_tail().ok_or_else(|| {
                Error::UnsupportedQuery(format!(
                    "schedule '{}' has no recurrent tail; unbounded unions are undecidable",
                    schedule.id()
                ))
            })?;
            // Times before the repeating tail contribute too.
            let start = interval.start;
            let end = start.max(tail_start) + tail_len - 1;
            (start, end)
        }
    };
    let mut acc = DirectedGraph::empty(schedule.n())?;
    for t in start..=end {
        acc.arcs.extend(schedule.graph_at(t)?.graph().arcs.iter().copied());
    }
    Ok(acc)
}

pub fn is_weakly_connected_across(schedule: &GraphSchedule, interval: IntervalSpec) -> Result<bool> {
    Ok(is_weakly_connected(&union_across(schedule, interval)?))
}
