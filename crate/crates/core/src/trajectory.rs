use serde::Serialize;

use crate::dynamics::AgentState;
use crate::error::{Error, Result};
use crate::lyapunov::{diameter, hull};

/// States of a run from `t0` on, plus the disagreement at every time.
///
/// States are stored at every time unless the run exceeded the storage cap, in
/// which case only sampled times (and always the last one) are kept.
#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    t0: u64,
    map_id: String,
    schedule_id: String,
    times: Vec<u64>,
    states: Vec<AgentState>,
    disagreement: Vec<f64>,
}

impl Trajectory {
    pub(crate) fn start(t0: u64, x0: AgentState, map_id: String, schedule_id: String) -> Self {
        Trajectory {
            t0,
            map_id,
            schedule_id,
            times: vec![t0],
            disagreement: vec![disagreement(&x0)],
            states: vec![x0],
        }
    }

    pub(crate) fn record(&mut self, t: u64, state: &AgentState, store: bool) {
        self.disagreement.push(disagreement(state));
        if store {
            self.times.push(t);
            self.states.push(state.clone());
        }
    }

    /// A trajectory with every state given, starting at `t0`.
    pub fn from_states(
        t0: u64,
        states: Vec<AgentState>,
        map_id: impl Into<String>,
        schedule_id: impl Into<String>,
    ) -> Result<Self> {
        let first = states.first().ok_or_else(|| Error::invalid("a trajectory needs at least one state"))?;
        if states.iter().any(|s| s.n() != first.n() || s.d() != first.d()) {
            return Err(Error::invalid("trajectory states differ in shape"));
        }
        Ok(Trajectory {
            t0,
            map_id: map_id.into(),
            schedule_id: schedule_id.into(),
            times: (t0..t0 + states.len() as u64).collect(),
            disagreement: states.iter().map(disagreement).collect(),
            states,
        })
    }

    pub fn t0(&self) -> u64 {
        self.t0
    }

    pub fn end_time(&self) -> u64 {
        self.t0 + self.disagreement.len() as u64 - 1
    }

    pub fn steps(&self) -> u64 {
        self.disagreement.len() as u64 - 1
    }

    pub fn map_id(&self) -> &str {
        &self.map_id
    }

    pub fn schedule_id(&self) -> &str {
        &self.schedule_id
    }

    /// Times of the stored states.
    pub fn times(&self) -> &[u64] {
        &self.times
    }

    pub fn states(&self) -> &[AgentState] {
        &self.states
    }

    /// Whether every time between `t0` and the end has its state stored.
    pub fn is_complete(&self) -> bool {
        self.states.len() == self.disagreement.len()
    }

    pub fn state_at(&self, t: u64) -> Option<&AgentState> {
        self.times.binary_search(&t).ok().map(|i| &self.states[i])
    }

    pub fn final_state(&self) -> &AgentState {
        self.states.last().expect("trajectories are nonempty")
    }

    pub fn disagreement_at(&self, t: u64) -> Option<f64> {
        t.checked_sub(self.t0).and_then(|i| self.disagreement.get(i as usize)).copied()
    }

    /// Disagreement at `t0, t0 + 1, …`.
    pub fn disagreements(&self) -> &[f64] {
        &self.disagreement
    }
}

/// Diameter of the hull of the agent points.
pub fn disagreement(x: &AgentState) -> f64 {
    diameter(&hull(x))
}
