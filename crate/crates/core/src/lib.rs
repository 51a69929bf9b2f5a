//! Multi-agent consensus under time-varying, unidirectional communication.
//!
//! - [`graph`]: directed graphs, neighbor sets, weak connectivity and root finding
//! - [`dynamics`]: averaging matrices, nonlinear update maps, assumption checkers
//! - [`lyapunov`]: convex hulls as a set-valued Lyapunov function
//! - [`simulator`]: trajectories under graph schedules, convergence probes
//! - [`scenarios`]: named schedule constructions

pub mod dynamics;
pub mod error;
pub mod format;
pub mod graph;
pub mod lyapunov;
pub mod scenarios;
pub mod schedule;
pub mod simulator;
pub mod trajectory;

pub use dynamics::{AgentState, StochasticMatrix, UpdateMap, WeightedDigraph};
pub use error::{Error, Result};
pub use graph::{DirectedGraph, IntervalSpec, NodeSet};
pub use lyapunov::{HullPolytope, MonitorRecord};
pub use schedule::GraphSchedule;
pub use trajectory::Trajectory;
