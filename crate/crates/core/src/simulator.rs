//! Trajectory generation and empirical convergence probes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dynamics::{AgentState, UpdateMap};
use crate::error::{Error, Result};
use crate::schedule::GraphSchedule;
use crate::trajectory::{disagreement, Trajectory};

/// Default cap on the number of stored states per trajectory.
pub const DEFAULT_STORAGE_CAP: usize = 1_000_000;

#[derive(Debug, Clone, Copy)]
pub struct SimOptions {
    pub storage_cap: usize,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions { storage_cap: DEFAULT_STORAGE_CAP }
    }
}

/// Runs `x(t+1) = map(t, schedule(t), x(t))` for `steps` steps from `x0` at `t0`,
/// calling `visit` on every new state. Returns the final state.
pub fn evolve(
    schedule: &GraphSchedule,
    map: &UpdateMap,
    x0: &AgentState,
    t0: u64,
    steps: u64,
    mut visit: impl FnMut(u64, &AgentState),
) -> Result<AgentState> {
    if t0 < schedule.first_time() {
        return Err(Error::invalid(format!(
            "start time {t0} precedes the schedule's first time {}",
            schedule.first_time()
        )));
    }
    if x0.n() != schedule.n() {
        return Err(Error::invalid(format!(
            "initial state has {} agents, schedule has {} nodes",
            x0.n(),
            schedule.n()
        )));
    }
    let mut x = x0.clone();
    for t in t0..t0 + steps {
        let graph = schedule.graph_at(t)?;
        x = map.apply(t, &graph, &x)?;
        visit(t + 1, &x);
    }
    Ok(x)
}

pub fn simulate(
    schedule: &GraphSchedule,
    map: &UpdateMap,
    x0: &AgentState,
    t0: u64,
    steps: u64,
) -> Result<Trajectory> {
    simulate_with(schedule, map, x0, t0, steps, SimOptions::default())
}

/// Like [`simulate`]; when `steps + 1` exceeds the storage cap, states are kept
/// only at every `stride`-th time and at the end.
pub fn simulate_with(
    schedule: &GraphSchedule,
    map: &UpdateMap,
    x0: &AgentState,
    t0: u64,
    steps: u64,
    options: SimOptions,
) -> Result<Trajectory> {
    if steps == 0 {
        return Err(Error::invalid("steps must be positive"));
    }
    let cap = options.storage_cap.max(2) as u64;
    let stride = if steps < cap { 1 } else { (steps + 1).div_ceil(cap - 1) };
    let mut traj = Trajectory::start(t0, x0.clone(), map.id(), schedule.id().to_string());
    let end = t0 + steps;
    evolve(schedule, map, x0, t0, steps, |t, x| {
        let store = (t - t0).is_multiple_of(stride) || t == end;
        traj.record(t, x, store);
    })?;
    Ok(traj)
}

/// First time whose disagreement is below `tol`.
pub fn detect_consensus(traj: &Trajectory, tol: f64) -> Option<u64> {
    traj.disagreements().iter().position(|&d| d < tol).map(|i| traj.t0() + i as u64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeStatus {
    Converged,
    /// Horizon reached while disagreement was still dropping noticeably.
    Undetermined,
    NotConverged,
}

#[derive(Debug, Clone)]
pub struct ProbeConfig {
    pub center: AgentState,
    pub radius: f64,
    pub samples: usize,
    pub t0: u64,
    pub horizon: u64,
    pub tol: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SampleReport {
    pub index: usize,
    pub initial: Vec<f64>,
    pub final_disagreement: f64,
    /// Largest distance of each agent from its initial point over the run.
    pub max_excursion: Vec<f64>,
    pub consensus_time: Option<u64>,
    pub status: ProbeStatus,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeReport {
    pub samples: usize,
    pub converged_fraction: f64,
    pub undetermined: usize,
    pub t0: u64,
    pub horizon: u64,
    pub tol: f64,
    pub seed: u64,
    pub per_sample: Vec<SampleReport>,
}

/// Relative drop over the last tenth of the horizon above which an
/// unconverged run counts as undetermined.
const STILL_SHRINKING: f64 = 1e-3;

fn sample_seed(seed: u64, index: usize) -> u64 {
    seed ^ (index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn check_probe(config: &ProbeConfig) -> Result<()> {
    if config.samples == 0 {
        return Err(Error::invalid("probe needs at least one sample"));
    }
    if config.radius.is_nan() || config.radius <= 0.0 {
        return Err(Error::invalid("probe radius must be positive"));
    }
    if config.tol.is_nan() || config.tol <= 0.0 {
        return Err(Error::invalid("tolerance must be positive"));
    }
    if config.horizon == 0 {
        return Err(Error::invalid("horizon must be positive"));
    }
    Ok(())
}

/// Runs sample `index` of a probe. Each sample draws from its own seed derived
/// from `(config.seed, index)`, so samples can run in any order.
pub fn probe_sample(
    schedule: &GraphSchedule,
    map: &UpdateMap,
    config: &ProbeConfig,
    index: usize,
) -> Result<SampleReport> {
    check_probe(config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(sample_seed(config.seed, index));
    let initial: Vec<f64> =
        config.center.coords().iter().map(|c| c + rng.gen_range(-config.radius..=config.radius)).collect();
    let x0 = AgentState::new(config.center.d(), initial.clone())?;
    let n = x0.n();
    let mut excursion = vec![0.0f64; n];
    let mut consensus_time = (disagreement(&x0) < config.tol).then_some(config.t0);
    let checkpoint = config.t0 + config.horizon - config.horizon / 10;
    let mut at_checkpoint = disagreement(&x0);
    let final_state = evolve(schedule, map, &x0, config.t0, config.horizon, |t, x| {
        for (i, ex) in excursion.iter_mut().enumerate() {
            let d: f64 =
                x.point(i).iter().zip(x0.point(i)).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            *ex = ex.max(d);
        }
        let dis = disagreement(x);
        if consensus_time.is_none() && dis < config.tol {
            consensus_time = Some(t);
        }
        if t == checkpoint {
            at_checkpoint = dis;
        }
    })?;
    let final_disagreement = disagreement(&final_state);
    let status = if consensus_time.is_some() {
        ProbeStatus::Converged
    } else if at_checkpoint > 0.0 && (at_checkpoint - final_disagreement) / at_checkpoint > STILL_SHRINKING {
        ProbeStatus::Undetermined
    } else {
        ProbeStatus::NotConverged
    };
    Ok(SampleReport { index, initial, final_disagreement, max_excursion: excursion, consensus_time, status })
}

/// Collects sample reports into a probe report, ordered by sample index.
pub fn aggregate(config: &ProbeConfig, mut per_sample: Vec<SampleReport>) -> ProbeReport {
    per_sample.sort_by_key(|s| s.index);
    let converged = per_sample.iter().filter(|s| s.status == ProbeStatus::Converged).count();
    let undetermined = per_sample.iter().filter(|s| s.status == ProbeStatus::Undetermined).count();
    ProbeReport {
        samples: per_sample.len(),
        converged_fraction: converged as f64 / per_sample.len().max(1) as f64,
        undetermined,
        t0: config.t0,
        horizon: config.horizon,
        tol: config.tol,
        seed: config.seed,
        per_sample,
    }
}

/// Simulates from `samples` random perturbations of `center` (each coordinate
/// within `radius`) and reports convergence and boundedness evidence.
pub fn attractivity_probe(
    schedule: &GraphSchedule,
    map: &UpdateMap,
    config: &ProbeConfig,
) -> Result<ProbeReport> {
    check_probe(config)?;
    let per_sample =
        (0..config.samples).map(|i| probe_sample(schedule, map, config, i)).collect::<Result<Vec<_>>>()?;
    Ok(aggregate(config, per_sample))
}
