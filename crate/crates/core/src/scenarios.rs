//! Named schedule constructions: the three-agent non-convergence example and
//! the test families for uniform and non-uniform connectivity.

use std::collections::BTreeSet;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dynamics::{AgentState, UpdateMap, WeightedDigraph};
use crate::error::{Error, Result};
use crate::graph::{is_weakly_connected_across, DirectedGraph, IntervalSpec};
use crate::schedule::{GraphSchedule, ScheduleGenerator};
use crate::simulator::evolve;

const ARCS_A: &[(usize, usize)] = &[(1, 2)];
const ARCS_B: &[(usize, usize)] = &[(1, 2), (2, 1)];
const ARCS_C: &[(usize, usize)] = &[(3, 2)];
const ARCS_D: &[(usize, usize)] = &[(2, 3), (3, 2)];

/// Which of the four arc sets a counterexample time uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CounterexamplePhase {
    A,
    B,
    C,
    D,
}

impl CounterexamplePhase {
    pub fn arcs(self) -> &'static [(usize, usize)] {
        match self {
            CounterexamplePhase::A => ARCS_A,
            CounterexamplePhase::B => ARCS_B,
            CounterexamplePhase::C => ARCS_C,
            CounterexamplePhase::D => ARCS_D,
        }
    }
}

/// Concatenation of blocks `B_s = A^{2s}, B, C^{2s+1}, D` for `s = 0, 1, 2, …`,
/// starting at time 1. Block `s` has length `4s + 3`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Counterexample;

impl Counterexample {
    pub const FIRST_TIME: u64 = 1;

    /// Time at which block `s` starts: `1 + Σ_{j<s} (4j + 3) = 1 + 2s² + s`.
    pub fn block_start(s: u64) -> u64 {
        Self::FIRST_TIME + 2 * s * s + s
    }

    /// `(s, offset within B_s)` for `t >= 1`.
    pub fn locate(t: u64) -> (u64, u64) {
        debug_assert!(t >= Self::FIRST_TIME);
        // estimate from 2s² ≈ t - 1, then correct
        let mut s = (((t - Self::FIRST_TIME) as f64 / 2.0).sqrt()) as u64;
        while s > 0 && Self::block_start(s) > t {
            s -= 1;
        }
        while Self::block_start(s + 1) <= t {
            s += 1;
        }
        (s, t - Self::block_start(s))
    }

    pub fn phase(t: u64) -> CounterexamplePhase {
        let (s, off) = Self::locate(t);
        if off < 2 * s {
            CounterexamplePhase::A
        } else if off == 2 * s {
            CounterexamplePhase::B
        } else if off < 4 * s + 2 {
            CounterexamplePhase::C
        } else {
            CounterexamplePhase::D
        }
    }
}

impl ScheduleGenerator for Counterexample {
    fn n(&self) -> usize {
        3
    }

    fn graph_at(&self, t: u64) -> WeightedDigraph {
        let arcs = Self::phase(t).arcs();
        WeightedDigraph::unit(DirectedGraph::new(3, arcs.iter().copied()).expect("static arc sets are valid"))
    }
}

/// The three-agent schedule under which unit-weight averaging fails to reach
/// consensus although every tail of the schedule is connected.
pub fn counterexample_schedule() -> GraphSchedule {
    GraphSchedule::generated(Arc::new(Counterexample), Counterexample::FIRST_TIME).with_id("counterexample")
}

/// Sample times `t_1 = 2`, `t_{p+1} = t_p + p + 1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SampleTimes(pub Vec<u64>);

impl SampleTimes {
    pub fn get(&self, p: usize) -> u64 {
        self.0[p - 1]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub fn counterexample_sample_times(p_max: usize) -> Result<SampleTimes> {
    if p_max == 0 {
        return Err(Error::invalid("p_max must be at least 1"));
    }
    let mut times = Vec::with_capacity(p_max);
    let mut t = 2u64;
    for p in 1..=p_max as u64 {
        times.push(t);
        t += p + 1;
    }
    Ok(SampleTimes(times))
}

/// Residual tolerance for sample `p`: tight early, looser once rounding accumulates.
pub fn counterexample_tolerance(p: usize) -> f64 {
    if p <= 20 {
        1e-12
    } else {
        1e-9
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CounterexampleRow {
    pub p: usize,
    pub t_p: u64,
    /// Simulated `ζ_3(t_p) - ζ_1(t_p)`.
    pub v: f64,
    /// Value predicted from the previous simulated sample (`1/2` for `p = 1`).
    pub predicted: f64,
    pub residual: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CounterexampleReport {
    pub rows: Vec<CounterexampleRow>,
    /// First `p` whose residual exceeds its tolerance.
    pub first_failure: Option<usize>,
    pub v_last: f64,
    /// `v(p_max) (1 - 2^{-p_max})`, a lower bound on the limit of `v`.
    pub limit_lower_bound: f64,
}

impl CounterexampleReport {
    pub fn passed(&self) -> bool {
        self.first_failure.is_none()
    }
}

/// Simulates the counterexample from `(0, 1, 1)` at time 1 and compares
/// `v(p) = ζ_3(t_p) - ζ_1(t_p)` with `v(1) = 1/2` and
/// `v(p+1) = v(p) (2^{p+1} - 1) / 2^{p+1}`.
pub fn verify_counterexample(p_max: usize) -> Result<CounterexampleReport> {
    if p_max < 2 {
        return Err(Error::invalid("p_max must be at least 2"));
    }
    let times = counterexample_sample_times(p_max)?;
    let schedule = counterexample_schedule();
    let x0 = AgentState::scalar(vec![0.0, 1.0, 1.0])?;
    let t0 = Counterexample::FIRST_TIME;
    let last = times.get(p_max);
    let mut samples = Vec::with_capacity(p_max);
    let mut next = 0;
    evolve(&schedule, &UpdateMap::LinearAverage, &x0, t0, last - t0, |t, x| {
        if next < p_max && t == times.0[next] {
            samples.push(x.value(2) - x.value(0));
            next += 1;
        }
    })?;
    if samples.len() != p_max {
        return Err(Error::Internal("sample times were not all visited".into()));
    }

    let mut rows = Vec::with_capacity(p_max);
    let mut first_failure = None;
    for (i, &v) in samples.iter().enumerate() {
        let p = i + 1;
        let predicted = if p == 1 {
            0.5
        } else {
            let scale = 2f64.powi(p as i32);
            samples[i - 1] * (scale - 1.0) / scale
        };
        let residual = (v - predicted).abs();
        let tolerance = counterexample_tolerance(p);
        if residual >= tolerance && first_failure.is_none() {
            first_failure = Some(p);
        }
        rows.push(CounterexampleRow { p, t_p: times.get(p), v, predicted, residual, tolerance });
    }
    let v_last = samples[p_max - 1];
    Ok(CounterexampleReport {
        rows,
        first_failure,
        v_last,
        limit_lower_bound: v_last * (1.0 - 2f64.powi(-(p_max as i32))),
    })
}

/// Periodic schedule of period `length` in which every window of `T + 1`
/// consecutive graphs is weakly connected.
///
/// A random spanning tree rooted at a random node has each of its arcs pinned
/// to one position modulo `T + 1`; since `length` is a multiple of `T + 1`, any
/// window of `T + 1` consecutive times sees every position and hence the whole
/// tree. Random extra arcs are added to every graph.
pub fn random_windowed_schedule(n: usize, window_t: u64, length: usize, seed: u64) -> Result<GraphSchedule> {
    if n < 2 {
        return Err(Error::invalid("windowed schedules need n >= 2"));
    }
    let w = window_t as usize + 1;
    if length == 0 || !length.is_multiple_of(w) {
        return Err(Error::invalid(format!("length {length} must be a positive multiple of T + 1 = {w}")));
    }
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..16 {
        let mut rng = ChaCha8Rng::seed_from_u64(master.gen());
        let schedule = build_windowed(n, w, length, &mut rng)?
            .with_id(format!("windowed:n={n},T={window_t},length={length},seed={seed}"));
        if windows_connected(&schedule, window_t)? {
            return Ok(schedule);
        }
    }
    Err(Error::Internal("windowed schedule failed validation 16 times".into()))
}

fn build_windowed(n: usize, w: usize, length: usize, rng: &mut ChaCha8Rng) -> Result<GraphSchedule> {
    let mut order: Vec<usize> = (1..=n).collect();
    order.shuffle(rng);
    let mut positions: Vec<BTreeSet<(usize, usize)>> = vec![BTreeSet::new(); w];
    for i in 1..n {
        let parent = order[rng.gen_range(0..i)];
        positions[rng.gen_range(0..w)].insert((parent, order[i]));
    }
    let extra_p = 1.0 / n as f64;
    let graphs = (0..length)
        .map(|t| {
            let mut arcs = positions[t % w].clone();
            for k in 1..=n {
                for l in 1..=n {
                    if k != l && rng.gen_bool(extra_p) {
                        arcs.insert((k, l));
                    }
                }
            }
            DirectedGraph::new(n, arcs).map(WeightedDigraph::unit)
        })
        .collect::<Result<Vec<_>>>()?;
    GraphSchedule::periodic(graphs, 0)
}

/// Checks every window `[t, t + T]` that starts within one period.
pub fn windows_connected(schedule: &GraphSchedule, window_t: u64) -> Result<bool> {
    let period = schedule.period().ok_or_else(|| Error::invalid("window check needs a periodic schedule"))?;
    let start = schedule.first_time();
    for t in start..start + period {
        if !is_weakly_connected_across(schedule, IntervalSpec::bounded(t, t + window_t)?)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Path graph edges `{g, g+1}` activated one at a time, cycling, with `g`
/// empty graphs after the `g`-th activation. Every tail is connected, yet the
/// idle gaps grow without bound.
#[derive(Debug, Clone, Copy)]
pub struct Stretching {
    n: usize,
}

impl Stretching {
    /// Time of the `g`-th active step (`g >= 1`): `(g - 1)(g + 2) / 2`.
    pub fn active_time(g: u64) -> u64 {
        (g - 1) * (g + 2) / 2
    }

    /// Index `g` of the active step at `t`, if `t` is active.
    pub fn active_index(t: u64) -> Option<u64> {
        let mut g = ((2.0 * t as f64).sqrt() as u64).max(1);
        while g > 1 && Self::active_time(g) > t {
            g -= 1;
        }
        while Self::active_time(g + 1) <= t {
            g += 1;
        }
        (Self::active_time(g) == t).then_some(g)
    }

    /// Number of steps from time 0 that contain `active` activations.
    pub fn steps_for_active(active: u64) -> u64 {
        Self::active_time(active) + 1
    }

    /// A window of `len` consecutive idle times: the gap after activation `len`.
    pub fn idle_window(len: u64) -> IntervalSpec {
        let start = Self::active_time(len) + 1;
        IntervalSpec { start, end: Some(start + len - 1) }
    }
}

impl ScheduleGenerator for Stretching {
    fn n(&self) -> usize {
        self.n
    }

    fn graph_at(&self, t: u64) -> WeightedDigraph {
        let arcs = match Self::active_index(t) {
            Some(g) => {
                let e = ((g - 1) % (self.n as u64 - 1)) as usize + 1;
                vec![(e, e + 1), (e + 1, e)]
            }
            None => Vec::new(),
        };
        WeightedDigraph::unit(DirectedGraph::new(self.n, arcs).expect("path edges are valid"))
    }
}

pub fn stretching_bidirectional_schedule(n: usize) -> Result<GraphSchedule> {
    if n < 2 {
        return Err(Error::invalid("stretching schedules need n >= 2"));
    }
    Ok(GraphSchedule::generated(Arc::new(Stretching { n }), 0).with_id(format!("stretching:n={n}")))
}

/// `window` random graphs in which the node sets `first` and `second` have no
/// neighbors, followed by the complete graph forever.
///
/// Arcs inside each set and arcs into the remaining nodes are drawn at random;
/// no arc enters either set from outside.
pub fn split_window_schedule(
    n: usize,
    first: &[usize],
    second: &[usize],
    window: usize,
    seed: u64,
) -> Result<GraphSchedule> {
    let l1: BTreeSet<usize> = first.iter().copied().collect();
    let l2: BTreeSet<usize> = second.iter().copied().collect();
    if l1.is_empty() || l2.is_empty() || !l1.is_disjoint(&l2) {
        return Err(Error::invalid("split sets must be nonempty and disjoint"));
    }
    if l1.iter().chain(&l2).any(|&k| k == 0 || k > n) || window == 0 {
        return Err(Error::invalid("split sets must lie in 1..=n and the window must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let allowed = |k: usize, l: usize| {
        if l1.contains(&l) {
            l1.contains(&k)
        } else if l2.contains(&l) {
            l2.contains(&k)
        } else {
            true
        }
    };
    let mut graphs = Vec::with_capacity(window + 1);
    for _ in 0..window {
        let mut arcs = Vec::new();
        for k in 1..=n {
            for l in 1..=n {
                if k != l && allowed(k, l) && rng.gen_bool(0.5) {
                    arcs.push((k, l));
                }
            }
        }
        graphs.push(WeightedDigraph::unit(DirectedGraph::new(n, arcs)?));
    }
    let complete = (1..=n).flat_map(|k| (1..=n).filter(move |&l| l != k).map(move |l| (k, l)));
    graphs.push(WeightedDigraph::unit(DirectedGraph::new(n, complete)?));
    Ok(GraphSchedule::finite(graphs, 0)?.with_id(format!("split:n={n},window={window},seed={seed}")))
}

/// Parses `counterexample`, `windowed:n=4,T=3,seed=7[,length=L]` or
/// `stretching:n=3`.
pub fn parse_scenario(spec: &str) -> Result<GraphSchedule> {
    let (name, params) = spec.split_once(':').unwrap_or((spec, ""));
    let mut values = std::collections::BTreeMap::new();
    for item in params.split(',').filter(|s| !s.is_empty()) {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| Error::invalid(format!("scenario parameter '{item}' is not key=value")))?;
        let v: u64 = v
            .trim()
            .parse()
            .map_err(|_| Error::invalid(format!("scenario parameter '{k}' is not an integer")))?;
        values.insert(k.trim().to_string(), v);
    }
    let get = |key: &str| {
        values
            .get(key)
            .copied()
            .ok_or_else(|| Error::invalid(format!("scenario '{name}' needs parameter '{key}'")))
    };
    let allow = |keys: &[&str]| -> Result<()> {
        match values.keys().find(|k| !keys.contains(&k.as_str())) {
            Some(k) => Err(Error::invalid(format!("scenario '{name}' has no parameter '{k}'"))),
            None => Ok(()),
        }
    };
    match name {
        "counterexample" => {
            allow(&[])?;
            Ok(counterexample_schedule())
        }
        "windowed" => {
            allow(&["n", "T", "seed", "length"])?;
            let t = get("T")?;
            let length = values.get("length").copied().unwrap_or(4 * (t + 1));
            random_windowed_schedule(get("n")? as usize, t, length as usize, get("seed")?)
        }
        "stretching" => {
            allow(&["n"])?;
            stretching_bidirectional_schedule(get("n")? as usize)
        }
        other => Err(Error::invalid(format!("unknown scenario '{other}'"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{is_weakly_connected, union_across};

    fn arcs_at(s: &GraphSchedule, t: u64) -> Vec<(usize, usize)> {
        s.graph_at(t).unwrap().graph().arcs().iter().copied().collect()
    }

    #[test]
    fn first_block_unrolled() {
        let s = counterexample_schedule();
        assert_eq!(arcs_at(&s, 1), ARCS_B);
        assert_eq!(arcs_at(&s, 2), ARCS_C);
        assert_eq!(arcs_at(&s, 3), ARCS_D);
        // B_1 = A A B C C C D, then B_2 opens with A
        let b1: Vec<_> = (4..=11).map(Counterexample::phase).collect();
        use CounterexamplePhase::*;
        assert_eq!(b1, vec![A, A, B, C, C, C, D, A]);
        assert_eq!(Counterexample::block_start(2), 11);
    }

    #[test]
    fn block_starts_match_lengths() {
        let mut start = 1;
        for s in 0..200u64 {
            assert_eq!(Counterexample::block_start(s), start);
            assert_eq!(Counterexample::locate(start), (s, 0));
            assert_eq!(Counterexample::locate(start + 4 * s + 2), (s, 4 * s + 2));
            start += 4 * s + 3;
        }
    }

    #[test]
    fn block_union_is_bidirectional_path() {
        let s = counterexample_schedule();
        for blk in 0..6 {
            let a = Counterexample::block_start(blk);
            let b = Counterexample::block_start(blk + 1) - 1;
            let u = union_across(&s, IntervalSpec::bounded(a, b).unwrap()).unwrap();
            assert_eq!(u.arcs().iter().copied().collect::<Vec<_>>(), vec![(1, 2), (2, 1), (2, 3), (3, 2)]);
        }
    }

    #[test]
    fn sample_times() {
        assert_eq!(counterexample_sample_times(1).unwrap().0, vec![2]);
        assert_eq!(counterexample_sample_times(3).unwrap().0, vec![2, 4, 7]);
        assert_eq!(counterexample_sample_times(5).unwrap().0, vec![2, 4, 7, 11, 16]);
        assert!(counterexample_sample_times(0).is_err());
    }

    #[test]
    fn counterexample_first_values() {
        let r = verify_counterexample(3).unwrap();
        assert!(r.passed());
        assert_eq!(r.rows[0].v, 0.5);
        assert_eq!(r.rows[1].v, 0.375);
        assert_eq!(r.rows[2].v, 21.0 / 64.0);
        assert!(verify_counterexample(1).is_err());
    }

    #[test]
    fn stretching_activations() {
        assert_eq!(Stretching::active_time(1), 0);
        assert_eq!(Stretching::active_time(2), 2);
        assert_eq!(Stretching::active_time(3), 5);
        for t in 0..2000u64 {
            let expected = (1..=100).find(|&g| Stretching::active_time(g) == t);
            assert_eq!(Stretching::active_index(t), expected, "t={t}");
        }
        let s = stretching_bidirectional_schedule(3).unwrap();
        assert_eq!(arcs_at(&s, 0), vec![(1, 2), (2, 1)]);
        assert!(arcs_at(&s, 1).is_empty());
        assert_eq!(arcs_at(&s, 2), vec![(2, 3), (3, 2)]);
        assert_eq!(arcs_at(&s, 5), vec![(1, 2), (2, 1)]);
    }

    #[test]
    fn stretching_tails_connected_windows_idle() {
        let s = stretching_bidirectional_schedule(4).unwrap();
        for t0 in [0u64, 10, 100] {
            // three consecutive activations after t0 cover the path
            let g = (1..).find(|&g| Stretching::active_time(g) >= t0).unwrap();
            let end = Stretching::active_time(g + 2);
            let u = union_across(&s, IntervalSpec::bounded(t0, end).unwrap()).unwrap();
            assert!(is_weakly_connected(&u));
        }
        for len in 1..50 {
            let w = Stretching::idle_window(len);
            assert_eq!(union_across(&s, w).unwrap().arc_count(), 0);
        }
        assert!(matches!(union_across(&s, IntervalSpec::unbounded(0)), Err(Error::UnsupportedQuery(_))));
    }

    #[test]
    fn windowed_schedule_contract() {
        let s = random_windowed_schedule(2, 0, 3, 1).unwrap();
        for t in 0..3 {
            assert!(is_weakly_connected(s.graph_at(t).unwrap().graph()));
        }
        let s = random_windowed_schedule(5, 3, 12, 9).unwrap();
        for t in 0..40 {
            assert!(is_weakly_connected_across(&s, IntervalSpec::bounded(t, t + 3).unwrap()).unwrap());
        }
        assert!(random_windowed_schedule(4, 3, 10, 1).is_err());
        assert!(random_windowed_schedule(1, 0, 1, 1).is_err());
    }

    #[test]
    fn windowed_schedule_deterministic() {
        let a = random_windowed_schedule(4, 3, 8, 7).unwrap();
        let b = random_windowed_schedule(4, 3, 8, 7).unwrap();
        for t in 0..8 {
            assert_eq!(a.graph_at(t).unwrap(), b.graph_at(t).unwrap());
        }
    }

    #[test]
    fn split_window_keeps_sets_isolated() {
        let s = split_window_schedule(5, &[1, 2], &[4], 20, 3).unwrap();
        for t in 0..20 {
            let g = s.graph_at(t).unwrap();
            let l1: crate::graph::NodeSet = [1, 2].into_iter().collect();
            let l2: crate::graph::NodeSet = [4].into_iter().collect();
            assert!(crate::graph::neighbors(&l1, g.graph()).unwrap().is_empty());
            assert!(crate::graph::neighbors(&l2, g.graph()).unwrap().is_empty());
        }
        assert!(is_weakly_connected(s.graph_at(20).unwrap().graph()));
        assert!(split_window_schedule(3, &[1], &[1], 5, 0).is_err());
    }

    #[test]
    fn scenario_parsing() {
        assert_eq!(parse_scenario("counterexample").unwrap().id(), "counterexample");
        assert_eq!(parse_scenario("stretching:n=3").unwrap().n(), 3);
        let w = parse_scenario("windowed:n=4,T=3,seed=7").unwrap();
        assert_eq!(w.period(), Some(16));
        assert!(parse_scenario("windowed:n=4,T=3").is_err());
        assert!(parse_scenario("stretching:n=3,x=1").is_err());
        assert!(parse_scenario("bogus").is_err());
    }
}
