//! Agent update maps and runtime checks of their structural assumptions.
//!
//! Agent states are indexed from 0 while graph labels start at 1: agent
//! label `k` owns point `k - 1` of an [`AgentState`].

mod checks;
mod ode;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::DirectedGraph;

pub use checks::{
    check_communication_assumption, check_strict_convexity, CommunicationReport, CommunicationViolation,
    ConvexityReport, ConvexityViolation, CONVEXITY_MARGIN,
};
pub use ode::{kuramoto_time1, nonlinear_consensus_time1, rk4_time1, Gain, Gains};

/// Substeps used by the time-1 maps unless configured otherwise.
pub const DEFAULT_SUBSTEPS: usize = 100;

/// Row-sum tolerance for [`StochasticMatrix`].
pub const ROW_SUM_TOLERANCE: f64 = 1e-12;

/// A directed graph with a positive weight on every arc, bounded in `[e_min, e_max]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedDigraph {
    graph: DirectedGraph,
    weights: BTreeMap<(usize, usize), f64>,
    e_min: f64,
    e_max: f64,
}

impl WeightedDigraph {
    pub fn new(
        graph: DirectedGraph,
        weights: BTreeMap<(usize, usize), f64>,
        e_min: f64,
        e_max: f64,
    ) -> Result<Self> {
        if !(e_min > 0.0 && e_min <= e_max && e_max.is_finite()) {
            return Err(Error::invalid(format!(
                "weight bounds [{e_min}, {e_max}] must satisfy 0 < e_min <= e_max < inf"
            )));
        }
        for arc in graph.arcs() {
            match weights.get(arc) {
                None => return Err(Error::invalid(format!("arc ({},{}) has no weight", arc.0, arc.1))),
                Some(&w) if !(w >= e_min && w <= e_max) => {
                    return Err(Error::invalid(format!(
                        "weight {w} of arc ({},{}) lies outside [{e_min}, {e_max}]",
                        arc.0, arc.1
                    )))
                }
                Some(_) => {}
            }
        }
        if let Some(extra) = weights.keys().find(|a| !graph.has_arc(a.0, a.1)) {
            return Err(Error::invalid(format!(
                "weight given for ({},{}) which is not an arc",
                extra.0, extra.1
            )));
        }
        Ok(WeightedDigraph { graph, weights, e_min, e_max })
    }

    /// Every arc weighted 1, bounds `[1, 1]`.
    pub fn unit(graph: DirectedGraph) -> Self {
        let weights = graph.arcs().iter().map(|&a| (a, 1.0)).collect();
        WeightedDigraph { graph, weights, e_min: 1.0, e_max: 1.0 }
    }

    /// Weights taken from the arc list; bounds are the observed extremes.
    pub fn from_weighted_arcs(n: usize, arcs: &[(usize, usize, f64)]) -> Result<Self> {
        let graph = DirectedGraph::new(n, arcs.iter().map(|&(k, l, _)| (k, l)))?;
        let weights: BTreeMap<_, _> = arcs.iter().map(|&(k, l, w)| ((k, l), w)).collect();
        let (lo, hi) =
            weights.values().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &w| (lo.min(w), hi.max(w)));
        let (lo, hi) = if weights.is_empty() { (1.0, 1.0) } else { (lo, hi) };
        Self::new(graph, weights, lo, hi)
    }

    pub fn graph(&self) -> &DirectedGraph {
        &self.graph
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    pub fn weight(&self, k: usize, l: usize) -> Option<f64> {
        self.weights.get(&(k, l)).copied()
    }

    pub fn weights(&self) -> &BTreeMap<(usize, usize), f64> {
        &self.weights
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.e_min, self.e_max)
    }

    pub fn relabel(&self, perm: &[usize]) -> Result<Self> {
        let graph = self.graph.relabel(perm)?;
        let weights = self.weights.iter().map(|(&(k, l), &w)| ((perm[k - 1], perm[l - 1]), w)).collect();
        Ok(WeightedDigraph { graph, weights, e_min: self.e_min, e_max: self.e_max })
    }
}

/// Square, non-negative, unit row sums, strictly positive diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StochasticMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl StochasticMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(Error::invalid("stochastic matrix must be square and nonempty"));
        }
        for (k, row) in rows.iter().enumerate() {
            if row.iter().any(|&v| v < 0.0 || !v.is_finite()) {
                return Err(Error::invalid(format!("row {} has a negative entry", k + 1)));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(Error::invalid(format!("row {} sums to {sum}", k + 1)));
            }
            if row[k] <= 0.0 {
                return Err(Error::invalid(format!("diagonal entry {} is not positive", k + 1)));
            }
        }
        Ok(StochasticMatrix { n, entries: rows.into_iter().flatten().collect() })
    }

    pub fn identity(n: usize) -> Self {
        let mut entries = vec![0.0; n * n];
        for k in 0..n {
            entries[k * n + k] = 1.0;
        }
        StochasticMatrix { n, entries }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Entry in row `k`, column `l`, both 1-based like node labels.
    pub fn get(&self, k: usize, l: usize) -> f64 {
        self.entries[(k - 1) * self.n + (l - 1)]
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.entries[(k - 1) * self.n..k * self.n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.entries.chunks(self.n)
    }
}

/// The averaging matrix of a weighted graph: agent `k` keeps its own state with
/// weight 1, adds each incoming neighbor `l` with weight `w_lk`, and
/// normalizes by the total.
pub fn build_update_matrix(graph: &WeightedDigraph) -> StochasticMatrix {
    let n = graph.n();
    let mut entries = vec![0.0; n * n];
    for k in 1..=n {
        let incoming: Vec<(usize, f64)> =
            graph.graph.in_neighbors(k).map(|l| (l, graph.weights[&(l, k)])).collect();
        let denom = 1.0 + incoming.iter().map(|&(_, w)| w).sum::<f64>();
        let row = &mut entries[(k - 1) * n..k * n];
        row[k - 1] = 1.0 / denom;
        for (l, w) in incoming {
            row[l - 1] = w / denom;
        }
    }
    StochasticMatrix { n, entries }
}

/// The positions of `n` agents in `R^d`, stored point after point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    d: usize,
    coords: Vec<f64>,
}

impl AgentState {
    pub fn new(d: usize, coords: Vec<f64>) -> Result<Self> {
        if d == 0 || d > 2 {
            return Err(Error::invalid(format!("dimension {d} unsupported (1 or 2)")));
        }
        if coords.is_empty() || !coords.len().is_multiple_of(d) {
            return Err(Error::invalid(format!(
                "{} coordinates do not form points of dimension {d}",
                coords.len()
            )));
        }
        if let Some(bad) = coords.iter().find(|c| !c.is_finite()) {
            return Err(Error::invalid(format!("non-finite coordinate {bad}")));
        }
        Ok(AgentState { d, coords })
    }

    pub fn scalar(values: Vec<f64>) -> Result<Self> {
        Self::new(1, values)
    }

    pub fn planar(points: &[[f64; 2]]) -> Result<Self> {
        Self::new(2, points.iter().flatten().copied().collect())
    }

    /// All agents at the same point.
    pub fn consensus(n: usize, point: &[f64]) -> Result<Self> {
        Self::new(point.len(), point.iter().copied().cycle().take(n * point.len()).collect())
    }

    pub fn n(&self) -> usize {
        self.coords.len() / self.d
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Point of the agent at 0-based index `i`.
    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.d..(i + 1) * self.d]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks(self.d)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Scalar value of agent `i` (d = 1 only).
    pub fn value(&self, i: usize) -> f64 {
        debug_assert_eq!(self.d, 1);
        self.coords[i]
    }

    /// Adds `c` to every point.
    pub fn translate(&self, c: &[f64]) -> Result<Self> {
        if c.len() != self.d {
            return Err(Error::invalid("translation has the wrong dimension"));
        }
        let coords = self.coords.iter().enumerate().map(|(j, v)| v + c[j % self.d]).collect();
        Ok(AgentState { d: self.d, coords })
    }

    /// Agent with label `k` moves to label `perm[k - 1]`.
    pub fn relabel(&self, perm: &[usize]) -> Result<Self> {
        crate::graph::check_permutation(perm, self.n())?;
        let mut coords = vec![0.0; self.coords.len()];
        for (i, p) in self.points().enumerate() {
            let dst = perm[i] - 1;
            coords[dst * self.d..(dst + 1) * self.d].copy_from_slice(p);
        }
        Ok(AgentState { d: self.d, coords })
    }

    fn require_scalar(&self, what: &str) -> Result<()> {
        if self.d != 1 {
            return Err(Error::invalid(format!("{what} requires scalar states (d = 1), got d = {}", self.d)));
        }
        Ok(())
    }

    fn require_agents(&self, n: usize) -> Result<()> {
        if self.n() != n {
            return Err(Error::invalid(format!("state has {} agents but the graph has {n} nodes", self.n())));
        }
        Ok(())
    }
}

impl fmt::Display for AgentState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, p) in self.points().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            if p.len() == 1 {
                write!(f, "{}", p[0])?;
            } else {
                write!(f, "({}, {})", p[0], p[1])?;
            }
        }
        write!(f, ")")
    }
}

/// Applies a stochastic matrix coordinate-wise:
/// `x'_k = x_k + Σ_l M_kl (x_l - x_k)`, which equals `Σ_l M_kl x_l` for unit row
/// sums and leaves locally agreeing agents exactly in place.
pub fn linear_step(matrix: &StochasticMatrix, x: &AgentState) -> Result<AgentState> {
    x.require_agents(matrix.n)?;
    let d = x.d;
    let mut out = x.coords.clone();
    for (k, row) in matrix.rows().enumerate() {
        let xk = x.point(k);
        for c in 0..d {
            let mut acc = 0.0;
            for (l, &m) in row.iter().enumerate() {
                if l != k && m != 0.0 {
                    acc += m * (x.coords[l * d + c] - xk[c]);
                }
            }
            out[k * d + c] = xk[c] + acc;
        }
    }
    Ok(AgentState { d, coords: out })
}

/// Heading alignment: each agent adopts the direction of the resultant of the
/// unit vectors of itself and its neighbors. Headings must lie in `(-π/2, π/2)`.
pub fn vicsek_step(graph: &DirectedGraph, headings: &AgentState) -> Result<AgentState> {
    headings.require_scalar("vicsek_step")?;
    headings.require_agents(graph.n())?;
    let half_pi = std::f64::consts::FRAC_PI_2;
    if let Some((i, &h)) = headings.coords.iter().enumerate().find(|(_, h)| h.is_nan() || h.abs() >= half_pi)
    {
        return Err(Error::Domain(format!("heading {h} of agent {} is outside (-pi/2, pi/2)", i + 1)));
    }
    let out = (1..=graph.n())
        .map(|k| {
            let hood: Vec<f64> =
                graph.closed_neighborhood(k).into_iter().map(|i| headings.coords[i - 1]).collect();
            // atan(sin/cos) is not bit-exact, so agreeing neighborhoods short-circuit
            if hood.iter().all(|&h| h == hood[0]) {
                return hood[0];
            }
            let (s, c) = hood.iter().fold((0.0, 0.0), |(s, c), h| (s + h.sin(), c + h.cos()));
            (s / c).atan()
        })
        .collect();
    AgentState::scalar(out)
}

/// Each agent adopts the coordinate-wise maximum over its closed neighborhood.
pub fn max_step(graph: &DirectedGraph, x: &AgentState) -> Result<AgentState> {
    x.require_agents(graph.n())?;
    let d = x.d;
    let mut out = Vec::with_capacity(x.coords.len());
    for k in 1..=graph.n() {
        let hood = graph.closed_neighborhood(k);
        for c in 0..d {
            let m = hood.iter().map(|&i| x.coords[(i - 1) * d + c]).fold(f64::NEG_INFINITY, f64::max);
            out.push(m);
        }
    }
    AgentState::new(d, out)
}

/// The one-step rules an agent population can follow.
#[derive(Debug, Clone)]
pub enum UpdateMap {
    /// `x(t+1) = A(G(t)) x(t)` with the averaging matrix of the weighted graph.
    LinearAverage,
    /// Time-1 map of the Kuramoto model in tangent coordinates.
    KuramotoTime1 { substeps: usize },
    /// Time-1 map of `ẋ_k = Σ γ_ik(x_i - x_k)`.
    NonlinearConsensus { gains: Gains, substeps: usize },
    /// Averaged heading direction, angles in `(-π/2, π/2)`.
    VicsekHeading,
    /// Neighborhood maximum; preserves hulls but is not strictly convex.
    MaxUpdate,
}

impl UpdateMap {
    pub fn kuramoto() -> Self {
        UpdateMap::KuramotoTime1 { substeps: DEFAULT_SUBSTEPS }
    }

    pub fn nonlinear(gains: Gains) -> Self {
        UpdateMap::NonlinearConsensus { gains, substeps: DEFAULT_SUBSTEPS }
    }

    pub fn id(&self) -> String {
        match self {
            UpdateMap::LinearAverage => "linear".into(),
            UpdateMap::KuramotoTime1 { substeps } => format!("kuramoto:substeps={substeps}"),
            UpdateMap::NonlinearConsensus { gains, substeps } => {
                format!("nonlinear:gain={},substeps={substeps}", gains.name())
            }
            UpdateMap::VicsekHeading => "vicsek".into(),
            UpdateMap::MaxUpdate => "max".into(),
        }
    }

    /// Whether the map keeps every agent strictly inside its neighborhood hull.
    pub fn is_conforming(&self) -> bool {
        !matches!(self, UpdateMap::MaxUpdate)
    }

    /// Whether the map is computed by numerical integration.
    pub fn is_integrated(&self) -> bool {
        matches!(self, UpdateMap::KuramotoTime1 { .. } | UpdateMap::NonlinearConsensus { .. })
    }

    /// Range from which checkers draw random scalar coordinates.
    pub fn sample_range(&self) -> (f64, f64) {
        match self {
            UpdateMap::VicsekHeading => (-1.5, 1.5),
            _ => (-10.0, 10.0),
        }
    }

    /// One application of the map at time `t` under `graph`.
    pub fn apply(&self, _t: u64, graph: &WeightedDigraph, x: &AgentState) -> Result<AgentState> {
        match self {
            UpdateMap::LinearAverage => linear_step(&build_update_matrix(graph), x),
            UpdateMap::KuramotoTime1 { substeps } => kuramoto_time1(graph.graph(), x, *substeps),
            UpdateMap::NonlinearConsensus { gains, substeps } => {
                nonlinear_consensus_time1(graph.graph(), x, gains, *substeps)
            }
            UpdateMap::VicsekHeading => vicsek_step(graph.graph(), x),
            UpdateMap::MaxUpdate => max_step(graph.graph(), x),
        }
    }
}
