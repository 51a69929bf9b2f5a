//! Convex hulls of agent states as a set-valued Lyapunov function.
//!
//! Along any trajectory of a map that keeps agents inside their neighborhood
//! hulls, the hull of all agents can only shrink. The monitor here checks that
//! containment step by step and records the hull diameter as the scalar
//! measure of disagreement.

use serde::Serialize;

use crate::dynamics::AgentState;
use crate::error::{Error, Result};
use crate::trajectory::Trajectory;

/// Default absolute slack for hull containment.
pub const DEFAULT_SLACK: f64 = 1e-9;

/// Minimal convex hull of a set of points in `R^1` or `R^2`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum HullPolytope {
    /// `lo == hi` for a single point.
    Interval { lo: f64, hi: f64 },
    /// Counter-clockwise extreme points; one vertex for a point, two for a segment.
    Polygon(Vec<[f64; 2]>),
}

impl HullPolytope {
    pub fn dim(&self) -> usize {
        match self {
            HullPolytope::Interval { .. } => 1,
            HullPolytope::Polygon(_) => 2,
        }
    }

    pub fn vertex_count(&self) -> usize {
        match self {
            HullPolytope::Interval { lo, hi } => {
                if lo == hi {
                    1
                } else {
                    2
                }
            }
            HullPolytope::Polygon(v) => v.len(),
        }
    }

    pub fn vertices(&self) -> Vec<Vec<f64>> {
        match self {
            HullPolytope::Interval { lo, hi } if lo == hi => vec![vec![*lo]],
            HullPolytope::Interval { lo, hi } => vec![vec![*lo], vec![*hi]],
            HullPolytope::Polygon(v) => v.iter().map(|p| p.to_vec()).collect(),
        }
    }

    pub fn diameter(&self) -> f64 {
        diameter(self)
    }

    /// Euclidean distance from `p` to the hull (0 inside).
    pub fn distance_to(&self, p: &[f64]) -> f64 {
        match self {
            HullPolytope::Interval { lo, hi } => (lo - p[0]).max(p[0] - hi).max(0.0),
            HullPolytope::Polygon(v) => {
                let q = [p[0], p[1]];
                match v.len() {
                    1 => dist(v[0], q),
                    2 => segment_distance(v[0], v[1], q),
                    m => {
                        let inside = (0..m).all(|i| cross(v[i], v[(i + 1) % m], q) >= 0.0);
                        if inside {
                            0.0
                        } else {
                            (0..m)
                                .map(|i| segment_distance(v[i], v[(i + 1) % m], q))
                                .fold(f64::INFINITY, f64::min)
                        }
                    }
                }
            }
        }
    }
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn segment_distance(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    if len2 == 0.0 {
        return dist(a, p);
    }
    let t = (((p[0] - a[0]) * ab[0] + (p[1] - a[1]) * ab[1]) / len2).clamp(0.0, 1.0);
    dist([a[0] + t * ab[0], a[1] + t * ab[1]], p)
}

/// Hull of the agent points: `[min, max]` in one dimension, monotone chain in two.
pub fn hull(x: &AgentState) -> HullPolytope {
    if x.d() == 1 {
        let (lo, hi) =
            x.coords().iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        return HullPolytope::Interval { lo, hi };
    }
    let mut pts: Vec<[f64; 2]> = x.points().map(|p| [p[0], p[1]]).collect();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() <= 2 {
        return HullPolytope::Polygon(pts);
    }
    // Andrew's monotone chain; collinear points are dropped.
    let mut lower: Vec<[f64; 2]> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<[f64; 2]> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    HullPolytope::Polygon(lower)
}

/// Whether every vertex of `inner` lies within `slack` of `outer`.
pub fn contains(outer: &HullPolytope, inner: &HullPolytope, slack: f64) -> Result<bool> {
    if outer.dim() != inner.dim() {
        return Err(Error::invalid(format!(
            "cannot compare hulls of dimension {} and {}",
            outer.dim(),
            inner.dim()
        )));
    }
    Ok(inner.vertices().iter().all(|v| outer.distance_to(v) <= slack))
}

/// Largest distance between two vertices.
pub fn diameter(poly: &HullPolytope) -> f64 {
    match poly {
        HullPolytope::Interval { lo, hi } => hi - lo,
        HullPolytope::Polygon(v) => {
            let mut best: f64 = 0.0;
            for i in 0..v.len() {
                for j in i + 1..v.len() {
                    best = best.max(dist(v[i], v[j]));
                }
            }
            best
        }
    }
}

/// One monitor verdict per stored state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonitorRecord {
    pub t: u64,
    pub diameter: f64,
    /// Hull at `t` inside the hull of the previously stored state.
    pub contained: bool,
    /// Every agent point lies in the hull of its own state.
    pub members_inside: bool,
    pub vertex_count: usize,
}

/// Checks hull containment between consecutive stored states.
///
/// When a trajectory keeps only sampled states, consecutive records compare
/// non-adjacent times, which is still implied by step-wise containment.
pub fn monitor_trajectory(traj: &Trajectory, slack: f64) -> Vec<MonitorRecord> {
    let mut records = Vec::with_capacity(traj.states().len());
    let mut prev: Option<HullPolytope> = None;
    for (&t, state) in traj.times().iter().zip(traj.states()) {
        let h = hull(state);
        let contained = match &prev {
            Some(p) => contains(p, &h, slack).unwrap_or(false),
            None => true,
        };
        let members_inside = state.points().all(|p| h.distance_to(p) <= slack);
        records.push(MonitorRecord {
            t,
            diameter: diameter(&h),
            contained,
            members_inside,
            vertex_count: h.vertex_count(),
        });
        prev = Some(h);
    }
    records
}

/// Number of records failing either containment condition.
pub fn violation_count(records: &[MonitorRecord]) -> usize {
    records.iter().filter(|r| !r.contained || !r.members_inside).count()
}

/// Drop in hull diameter from `t0` to `t0 + tau`.
pub fn decrease_over_window(traj: &Trajectory, t0: u64, tau: u64) -> Result<f64> {
    if tau == 0 {
        return Err(Error::invalid("window length must be positive"));
    }
    let before = traj.disagreement_at(t0);
    let after = traj.disagreement_at(t0 + tau);
    match (before, after) {
        (Some(b), Some(a)) => Ok(b - a),
        _ => Err(Error::invalid(format!(
            "window [{t0},{}] is not covered by the trajectory [{},{}]",
            t0 + tau,
            traj.t0(),
            traj.end_time()
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: &[f64]) -> AgentState {
        AgentState::scalar(v.to_vec()).unwrap()
    }

    #[test]
    fn interval_hulls() {
        assert_eq!(hull(&scalar(&[0.0, 1.0, 0.5])), HullPolytope::Interval { lo: 0.0, hi: 1.0 });
        let single = hull(&scalar(&[2.0, 2.0]));
        assert_eq!(single.vertex_count(), 1);
        assert_eq!(single.diameter(), 0.0);
    }

    #[test]
    fn planar_hull_drops_interior_points() {
        let x = AgentState::planar(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.25, 0.25]]).unwrap();
        assert_eq!(hull(&x), HullPolytope::Polygon(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]));
    }

    #[test]
    fn collinear_points_collapse_to_segment() {
        let x = AgentState::planar(&[[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [0.5, 0.5]]).unwrap();
        assert_eq!(hull(&x), HullPolytope::Polygon(vec![[0.0, 0.0], [2.0, 2.0]]));
        let same = AgentState::planar(&[[1.0, 1.0], [1.0, 1.0]]).unwrap();
        assert_eq!(hull(&same).vertex_count(), 1);
    }

    #[test]
    fn containment_examples() {
        let unit = HullPolytope::Interval { lo: 0.0, hi: 1.0 };
        assert!(contains(&unit, &HullPolytope::Interval { lo: 0.2, hi: 0.8 }, 0.0).unwrap());
        assert!(!contains(&unit, &HullPolytope::Interval { lo: 0.0, hi: 1.1 }, 0.0).unwrap());
        assert!(contains(&unit, &unit, 0.0).unwrap());
        let tri = HullPolytope::Polygon(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]);
        assert!(contains(&tri, &tri, 0.0).unwrap());
        assert!(matches!(contains(&unit, &tri, 0.0), Err(Error::InvalidArgument(_))));
        let outside = HullPolytope::Polygon(vec![[0.6, 0.6]]);
        assert!(!contains(&tri, &outside, 0.0).unwrap());
        assert!(contains(&tri, &outside, 0.15).unwrap());
    }

    #[test]
    fn diameters() {
        assert_eq!(diameter(&HullPolytope::Interval { lo: 0.0, hi: 1.0 }), 1.0);
        assert_eq!(diameter(&HullPolytope::Polygon(vec![[0.0, 0.0], [3.0, 4.0]])), 5.0);
        assert_eq!(diameter(&HullPolytope::Polygon(vec![[1.0, 1.0]])), 0.0);
    }

    #[test]
    fn monitor_flags_escape() {
        let states = vec![scalar(&[0.0, 1.0]), scalar(&[0.2, 0.8]), scalar(&[0.2, 1.5])];
        let traj = Trajectory::from_states(0, states, "hand", "hand").unwrap();
        let records = monitor_trajectory(&traj, DEFAULT_SLACK);
        assert_eq!(records.len(), 3);
        assert!(records[1].contained);
        assert!(!records[2].contained);
        assert_eq!(violation_count(&records), 1);
    }

    #[test]
    fn window_decrease() {
        let states = vec![scalar(&[0.0, 1.0]), scalar(&[0.5, 0.5])];
        let traj = Trajectory::from_states(0, states, "hand", "hand").unwrap();
        assert_eq!(decrease_over_window(&traj, 0, 1).unwrap(), 1.0);
        assert!(decrease_over_window(&traj, 0, 2).is_err());
        assert!(decrease_over_window(&traj, 0, 0).is_err());
    }
}
