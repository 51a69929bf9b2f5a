//! Sampling checkers for the locality and strict-convexity properties of an
//! update map. Violations are data, not errors.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{AgentState, UpdateMap, WeightedDigraph};
use crate::error::{Error, Result};
use crate::graph::DirectedGraph;
use crate::lyapunov::{hull, HullPolytope};

/// Relative margin (times the neighborhood diameter) for strict interiority.
pub const CONVEXITY_MARGIN: f64 = 1e-9;

const INTEGRATED_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Serialize)]
pub struct CommunicationViolation {
    /// Label of the agent whose output changed.
    pub agent: usize,
    pub original: Vec<f64>,
    pub perturbed: Vec<f64>,
    pub difference: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CommunicationReport {
    pub trials: usize,
    pub checked: usize,
    pub violations: Vec<CommunicationViolation>,
}

impl CommunicationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn violating_agents(&self) -> Vec<usize> {
        let mut agents: Vec<usize> = self.violations.iter().map(|v| v.agent).collect();
        agents.sort_unstable();
        agents.dedup();
        agents
    }
}

/// Perturbs, for each agent `k`, the agents outside `{k} ∪ Neighbors(k)` of
/// `declared` and checks that component `k` of `map` driven by `drive` does
/// not move: bit-for-bit for closed-form maps, within 1e-12 for integrated ones.
pub fn check_communication_assumption(
    map: &UpdateMap,
    drive: &WeightedDigraph,
    declared: &DirectedGraph,
    x: &AgentState,
    trials: usize,
    seed: u64,
) -> Result<CommunicationReport> {
    if trials == 0 {
        return Err(Error::invalid("trials must be at least 1"));
    }
    if declared.n() != drive.n() || x.n() != drive.n() {
        return Err(Error::invalid("graph and state sizes disagree"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = map.sample_range();
    let base = map.apply(0, drive, x)?;
    let tol = if map.is_integrated() { INTEGRATED_TOLERANCE } else { 0.0 };
    let d = x.d();
    let mut report = CommunicationReport { trials, checked: 0, violations: Vec::new() };

    for k in 1..=x.n() {
        let hood = declared.closed_neighborhood(k);
        if hood.len() == x.n() {
            continue;
        }
        for _ in 0..trials {
            let mut coords = x.coords().to_vec();
            for i in (1..=x.n()).filter(|i| !hood.contains(i)) {
                for c in 0..d {
                    coords[(i - 1) * d + c] = rng.gen_range(lo..hi);
                }
            }
            let perturbed = AgentState::new(d, coords)?;
            let out = map.apply(0, drive, &perturbed)?;
            report.checked += 1;
            let diff = base
                .point(k - 1)
                .iter()
                .zip(out.point(k - 1))
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            if diff > tol {
                report.violations.push(CommunicationViolation {
                    agent: k,
                    original: x.coords().to_vec(),
                    perturbed: perturbed.coords().to_vec(),
                    difference: diff,
                });
                break;
            }
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvexityViolation {
    pub agent: usize,
    pub state: Vec<f64>,
    pub output: Vec<f64>,
    /// Labels of the closed neighborhood of `agent`.
    pub neighborhood: Vec<usize>,
    pub reason: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvexityReport {
    pub samples: usize,
    pub checked_agents: usize,
    pub violations: Vec<ConvexityViolation>,
}

impl ConvexityReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Draws random states of dimension `dim` and checks that every agent lands
/// strictly inside the relative interior of the hull of its closed
/// neighborhood (or stays put when that neighborhood agrees).
///
/// Every other sample draws from two values only, so agreeing neighborhoods
/// occur as well.
pub fn check_strict_convexity(
    map: &UpdateMap,
    graph: &WeightedDigraph,
    dim: usize,
    samples: usize,
    seed: u64,
) -> Result<ConvexityReport> {
    if samples == 0 {
        return Err(Error::invalid("samples must be at least 1"));
    }
    let n = graph.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = map.sample_range();
    let mut report = ConvexityReport { samples, checked_agents: 0, violations: Vec::new() };

    for s in 0..samples {
        let coords: Vec<f64> = if s % 2 == 1 {
            let pool: Vec<f64> = (0..2).map(|_| rng.gen_range(lo..hi)).collect();
            (0..n * dim).map(|_| pool[rng.gen_range(0..2)]).collect()
        } else {
            (0..n * dim).map(|_| rng.gen_range(lo..hi)).collect()
        };
        let x = AgentState::new(dim, coords)?;
        let out = map.apply(0, graph, &x)?;
        for k in 1..=n {
            let hood = graph.graph().closed_neighborhood(k);
            let local = AgentState::new(dim, hood.iter().flat_map(|&i| x.point(i - 1).to_vec()).collect())?;
            report.checked_agents += 1;
            if let Some(reason) = interiority_failure(&hull(&local), out.point(k - 1), map.is_integrated()) {
                report.violations.push(ConvexityViolation {
                    agent: k,
                    state: x.coords().to_vec(),
                    output: out.point(k - 1).to_vec(),
                    neighborhood: hood,
                    reason,
                });
            }
        }
    }
    Ok(report)
}

/// `None` when `p` is in the relative interior of `poly` (or equals it, for a
/// single-vertex hull).
fn interiority_failure(poly: &HullPolytope, p: &[f64], integrated: bool) -> Option<String> {
    let diam = poly.diameter();
    let eps = CONVEXITY_MARGIN * diam;
    match poly {
        HullPolytope::Interval { lo, hi } if lo == hi => {
            let tol = if integrated { INTEGRATED_TOLERANCE } else { 0.0 };
            ((p[0] - lo).abs() > tol).then(|| format!("agreeing neighborhood {lo} moved to {}", p[0]))
        }
        HullPolytope::Interval { lo, hi } => (!(p[0] > lo + eps && p[0] < hi - eps))
            .then(|| format!("{} not strictly inside ({lo}, {hi})", p[0])),
        HullPolytope::Polygon(vertices) => match vertices.len() {
            1 => {
                let v = vertices[0];
                let tol = if integrated { INTEGRATED_TOLERANCE } else { 0.0 };
                let dist = ((p[0] - v[0]).powi(2) + (p[1] - v[1]).powi(2)).sqrt();
                (dist > tol).then(|| format!("agreeing neighborhood {v:?} moved to {p:?}"))
            }
            2 => {
                let (a, b) = (vertices[0], vertices[1]);
                let ab = [b[0] - a[0], b[1] - a[1]];
                let ap = [p[0] - a[0], p[1] - a[1]];
                let len = diam;
                let off_line = (ab[0] * ap[1] - ab[1] * ap[0]).abs() / len;
                let along = (ab[0] * ap[0] + ab[1] * ap[1]) / len;
                (!(off_line <= eps && along > eps && along < len - eps))
                    .then(|| format!("{p:?} not in the open segment {a:?}-{b:?}"))
            }
            _ => {
                let m = vertices.len();
                let inside = (0..m).all(|i| {
                    let (a, b) = (vertices[i], vertices[(i + 1) % m]);
                    let edge = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
                    let cross = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
                    cross / edge > eps
                });
                (!inside).then(|| format!("{p:?} not strictly inside the neighborhood polygon"))
            }
        },
    }
}
