use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use super::AgentState;
use crate::error::{Error, Result};
use crate::graph::DirectedGraph;

/// Integrates `ẋ = field(x)` over unit time with `substeps` classical RK4 steps.
pub fn rk4_time1<F>(x: &[f64], substeps: usize, mut field: F) -> Vec<f64>
where
    F: FnMut(&[f64], &mut [f64]),
{
    let n = x.len();
    let h = 1.0 / substeps as f64;
    let mut y = x.to_vec();
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut tmp = vec![0.0; n];
    for _ in 0..substeps {
        field(&y, &mut k1);
        for i in 0..n {
            tmp[i] = y[i] + 0.5 * h * k1[i];
        }
        field(&tmp, &mut k2);
        for i in 0..n {
            tmp[i] = y[i] + 0.5 * h * k2[i];
        }
        field(&tmp, &mut k3);
        for i in 0..n {
            tmp[i] = y[i] + h * k3[i];
        }
        field(&tmp, &mut k4);
        for i in 0..n {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    y
}

/// 0-based incoming adjacency: `incoming[k]` lists the agents `k` listens to.
fn incoming_lists(graph: &DirectedGraph) -> Vec<Vec<usize>> {
    let mut incoming = vec![Vec::new(); graph.n()];
    for &(i, k) in graph.arcs() {
        incoming[k - 1].push(i - 1);
    }
    incoming
}

fn check_time1_args(graph: &DirectedGraph, x: &AgentState, substeps: usize, what: &str) -> Result<()> {
    x.require_scalar(what)?;
    x.require_agents(graph.n())?;
    if substeps == 0 {
        return Err(Error::invalid("substeps must be at least 1"));
    }
    Ok(())
}

/// Fixed-step RK4 is only conditionally stable; stiff couplings with too few
/// substeps blow up instead of settling.
fn finite_result(out: Vec<f64>, substeps: usize, what: &str) -> Result<AgentState> {
    if out.iter().all(|v| v.is_finite()) {
        AgentState::scalar(out)
    } else {
        Err(Error::Domain(format!("{what} diverged with {substeps} substeps; increase substeps")))
    }
}

/// Time-1 map of the Kuramoto model written in the chart `x = tan θ`:
/// `ẋ_k = Σ_{i→k} (x_i - x_k) / (√(1+x_i²) √(1+x_k²))`.
pub fn kuramoto_time1(graph: &DirectedGraph, x: &AgentState, substeps: usize) -> Result<AgentState> {
    check_time1_args(graph, x, substeps, "kuramoto_time1")?;
    let incoming = incoming_lists(graph);
    let out = rk4_time1(x.coords(), substeps, |y, dy| {
        for (k, sources) in incoming.iter().enumerate() {
            let sk = (1.0 + y[k] * y[k]).sqrt();
            dy[k] = sources.iter().map(|&i| (y[i] - y[k]) / ((1.0 + y[i] * y[i]).sqrt() * sk)).sum();
        }
    });
    finite_result(out, substeps, "kuramoto_time1")
}

/// Time-1 map of `ẋ_k = Σ_{i→k} γ_ik(x_i - x_k)`.
pub fn nonlinear_consensus_time1(
    graph: &DirectedGraph,
    x: &AgentState,
    gains: &Gains,
    substeps: usize,
) -> Result<AgentState> {
    check_time1_args(graph, x, substeps, "nonlinear_consensus_time1")?;
    let mut couplings: Vec<Vec<(usize, &Gain)>> = vec![Vec::new(); graph.n()];
    for &(i, k) in graph.arcs() {
        let gain = gains.for_arc(i, k);
        gain.validate()?;
        couplings[k - 1].push((i - 1, gain));
    }
    let out = rk4_time1(x.coords(), substeps, |y, dy| {
        for (k, terms) in couplings.iter().enumerate() {
            dy[k] = terms.iter().map(|(i, g)| g.eval(y[*i] - y[k])).sum();
        }
    });
    finite_result(out, substeps, "nonlinear_consensus_time1")
}

/// An odd, strictly increasing coupling function.
#[derive(Clone)]
pub struct Gain {
    name: String,
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl Gain {
    pub fn custom(name: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Gain { name: name.into(), f: Arc::new(f) }
    }

    pub fn identity() -> Self {
        Gain::custom("identity", |s| s)
    }

    pub fn linear(c: f64) -> Self {
        Gain::custom(format!("linear({c})"), move |s| c * s)
    }

    pub fn cubic() -> Self {
        Gain::custom("cubic", |s| s * s * s)
    }

    pub fn tanh() -> Self {
        Gain::custom("tanh", f64::tanh)
    }

    pub fn sinh() -> Self {
        Gain::custom("sinh", f64::sinh)
    }

    /// Looks up a built-in gain by name (`identity`, `cubic`, `tanh`, `sinh`).
    pub fn named(name: &str) -> Result<Self> {
        match name {
            "identity" => Ok(Gain::identity()),
            "cubic" => Ok(Gain::cubic()),
            "tanh" => Ok(Gain::tanh()),
            "sinh" => Ok(Gain::sinh()),
            other => Err(Error::invalid(format!("unknown gain '{other}'"))),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, s: f64) -> f64 {
        (self.f)(s)
    }

    /// Samples oddness and strict monotonicity on a fixed grid over `[-10, 10]`.
    pub fn validate(&self) -> Result<()> {
        let mut grid: Vec<f64> = (0..=200).map(|i| -10.0 + 0.1 * i as f64).collect();
        grid.extend([-1e-3, 1e-3, -1e-6, 1e-6]);
        grid.sort_by(f64::total_cmp);
        let mut prev = f64::NEG_INFINITY;
        for &s in &grid {
            let (pos, neg) = (self.eval(s), self.eval(-s));
            if !pos.is_finite() {
                return Err(Error::invalid(format!("gain '{}' is not finite at {s}", self.name)));
            }
            if (pos + neg).abs() > 1e-12 * pos.abs().max(1.0) {
                return Err(Error::invalid(format!("gain '{}' is not odd at {s}", self.name)));
            }
            if pos <= prev {
                return Err(Error::invalid(format!(
                    "gain '{}' is not strictly increasing at {s}",
                    self.name
                )));
            }
            prev = pos;
        }
        Ok(())
    }
}

impl fmt::Debug for Gain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("Gain").field(&self.name).finish()
    }
}

/// Gain per arc, with a default for arcs that have no override.
#[derive(Debug, Clone)]
pub struct Gains {
    default: Gain,
    per_arc: BTreeMap<(usize, usize), Gain>,
}

impl Gains {
    pub fn uniform(gain: Gain) -> Self {
        Gains { default: gain, per_arc: BTreeMap::new() }
    }

    pub fn with_arc(mut self, i: usize, k: usize, gain: Gain) -> Self {
        self.per_arc.insert((i, k), gain);
        self
    }

    pub fn for_arc(&self, i: usize, k: usize) -> &Gain {
        self.per_arc.get(&(i, k)).unwrap_or(&self.default)
    }

    pub fn name(&self) -> String {
        if self.per_arc.is_empty() {
            self.default.name.clone()
        } else {
            format!("{}+{}", self.default.name, self.per_arc.len())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn pair() -> DirectedGraph {
        DirectedGraph::new(2, [(1, 2), (2, 1)]).unwrap()
    }

    #[test]
    fn rk4_matches_exponential() {
        let y = rk4_time1(&[1.0], 100, |y, dy| dy[0] = -y[0]);
        assert_abs_diff_eq!(y[0], (-1.0f64).exp(), epsilon = 1e-10);
    }

    #[test]
    fn kuramoto_fixed_point() {
        let chain = DirectedGraph::new(3, [(1, 2), (2, 3)]).unwrap();
        let x = AgentState::scalar(vec![0.7; 3]).unwrap();
        assert_eq!(kuramoto_time1(&chain, &x, 100).unwrap(), x);
    }

    #[test]
    fn kuramoto_odd_symmetry() {
        let a = 1.3;
        let x = AgentState::scalar(vec![-a, a]).unwrap();
        let out = kuramoto_time1(&pair(), &x, 100).unwrap();
        let b = out.value(1);
        assert!(b > 0.0 && b < a);
        assert_abs_diff_eq!(out.value(0), -b, epsilon = 1e-15);
        assert_abs_diff_eq!(out.value(0) + out.value(1), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn kuramoto_regression_fixture() {
        let x = AgentState::scalar(vec![0.0, 1.0]).unwrap();
        let coarse = kuramoto_time1(&pair(), &x, 1000).unwrap();
        let fine = kuramoto_time1(&pair(), &x, 10_000).unwrap();
        for i in 0..2 {
            assert_abs_diff_eq!(coarse.value(i), fine.value(i), epsilon = 1e-8);
        }
        // frozen from the 10000-substep run
        assert_abs_diff_eq!(coarse.value(0), KURAMOTO_PAIR_FIXTURE[0], epsilon = 1e-8);
        assert_abs_diff_eq!(coarse.value(1), KURAMOTO_PAIR_FIXTURE[1], epsilon = 1e-8);
    }

    const KURAMOTO_PAIR_FIXTURE: [f64; 2] = [0.392788873716198, 0.6072111262838016];

    #[test]
    fn kuramoto_rejects_planar_state() {
        let x = AgentState::planar(&[[0.0, 0.0], [1.0, 1.0]]).unwrap();
        assert!(matches!(kuramoto_time1(&pair(), &x, 10), Err(Error::InvalidArgument(_))));
        let y = AgentState::scalar(vec![0.0, 1.0]).unwrap();
        assert!(kuramoto_time1(&pair(), &y, 0).is_err());
    }

    #[test]
    fn identity_gain_closed_form() {
        let x = AgentState::scalar(vec![0.0, 1.0]).unwrap();
        let out = nonlinear_consensus_time1(&pair(), &x, &Gains::uniform(Gain::identity()), 100).unwrap();
        let c = (1.0 - (-2.0f64).exp()) / 2.0;
        assert_abs_diff_eq!(out.value(0), c, epsilon = 1e-8);
        assert_abs_diff_eq!(out.value(1), 1.0 - c, epsilon = 1e-8);
    }

    #[test]
    fn nonlinear_fixed_point_and_symmetry() {
        let gains = Gains::uniform(Gain::cubic());
        let same = AgentState::scalar(vec![-2.0, -2.0]).unwrap();
        assert_eq!(nonlinear_consensus_time1(&pair(), &same, &gains, 50).unwrap(), same);
        let x = AgentState::scalar(vec![-0.8, 0.8]).unwrap();
        let out = nonlinear_consensus_time1(&pair(), &x, &gains, 50).unwrap();
        assert_abs_diff_eq!(out.value(0), -out.value(1), epsilon = 1e-15);
    }

    #[test]
    fn divergence_is_reported() {
        let complete = DirectedGraph::new(
            4,
            (1..=4).flat_map(|k| (1..=4).filter(move |&l| l != k).map(move |l| (k, l))),
        )
        .unwrap();
        let x = AgentState::scalar(vec![-3.0, 3.0, -3.0, 3.0]).unwrap();
        let gains = Gains::uniform(Gain::cubic());
        assert!(matches!(nonlinear_consensus_time1(&complete, &x, &gains, 2), Err(Error::Domain(_))));
        assert!(nonlinear_consensus_time1(&complete, &x, &gains, 2000).is_ok());
    }

    #[test]
    fn gain_validation() {
        assert!(Gain::identity().validate().is_ok());
        assert!(Gain::cubic().validate().is_ok());
        assert!(Gain::tanh().validate().is_ok());
        assert!(Gain::custom("even", |s| s * s).validate().is_err());
        assert!(Gain::custom("shifted", |s| s + 1.0).validate().is_err());
        assert!(Gain::custom("decreasing", |s| -s).validate().is_err());
        assert!(Gain::custom("flat", |s: f64| s.clamp(-1.0, 1.0)).validate().is_err());

        let x = AgentState::scalar(vec![0.0, 1.0]).unwrap();
        let bad = Gains::uniform(Gain::identity()).with_arc(1, 2, Gain::custom("even", |s| s * s));
        assert!(matches!(nonlinear_consensus_time1(&pair(), &x, &bad, 10), Err(Error::InvalidArgument(_))));
    }
}
