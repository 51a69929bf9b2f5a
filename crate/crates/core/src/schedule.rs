//! Time-indexed sequences of communication graphs.

use std::fmt;
use std::sync::Arc;

use crate::dynamics::WeightedDigraph;
use crate::error::{Error, Result};

/// A schedule whose graphs are computed on demand.
pub trait ScheduleGenerator: Send + Sync + fmt::Debug {
    fn n(&self) -> usize;

    /// Graph at time `t`; callers guarantee `t >= first_time`.
    fn graph_at(&self, t: u64) -> WeightedDigraph;

    /// `(start, period)` of a tail that repeats forever, if known.
    fn recurrent_tail(&self) -> Option<(u64, u64)> {
        None
    }
}

#[derive(Debug, Clone)]
pub enum ScheduleKind {
    /// Explicit list; the last graph repeats forever after the list ends.
    Finite(Vec<WeightedDigraph>),
    /// Explicit list repeated with period equal to its length.
    Periodic(Vec<WeightedDigraph>),
    Generated(Arc<dyn ScheduleGenerator>),
}

/// A map from discrete time `t >= first_time` to a communication graph.
#[derive(Debug, Clone)]
pub struct GraphSchedule {
    id: String,
    n: usize,
    first_time: u64,
    kind: ScheduleKind,
}

impl GraphSchedule {
    /// A schedule that holds `graph` at every time.
    pub fn constant(graph: WeightedDigraph, first_time: u64) -> Self {
        GraphSchedule {
            id: format!("constant:{}", graph.graph()),
            n: graph.n(),
            first_time,
            kind: ScheduleKind::Finite(vec![graph]),
        }
    }

    pub fn finite(graphs: Vec<WeightedDigraph>, first_time: u64) -> Result<Self> {
        let n = common_size(&graphs)?;
        Ok(GraphSchedule {
            id: format!("finite:{}", graphs.len()),
            n,
            first_time,
            kind: ScheduleKind::Finite(graphs),
        })
    }

    pub fn periodic(graphs: Vec<WeightedDigraph>, first_time: u64) -> Result<Self> {
        let n = common_size(&graphs)?;
        Ok(GraphSchedule {
            id: format!("periodic:{}", graphs.len()),
            n,
            first_time,
            kind: ScheduleKind::Periodic(graphs),
        })
    }

    pub fn generated(generator: Arc<dyn ScheduleGenerator>, first_time: u64) -> Self {
        GraphSchedule {
            id: format!("{generator:?}"),
            n: generator.n(),
            first_time,
            kind: ScheduleKind::Generated(generator),
        }
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn first_time(&self) -> u64 {
        self.first_time
    }

    pub fn kind(&self) -> &ScheduleKind {
        &self.kind
    }

    /// Period length for periodic schedules.
    pub fn period(&self) -> Option<u64> {
        match &self.kind {
            ScheduleKind::Periodic(graphs) => Some(graphs.len() as u64),
            _ => None,
        }
    }

    /// `(start, length)` of a block that repeats forever from `start` on.
    pub fn recurrent_tail(&self) -> Option<(u64, u64)> {
        match &self.kind {
            ScheduleKind::Finite(graphs) => Some((self.first_time + graphs.len() as u64 - 1, 1)),
            ScheduleKind::Periodic(graphs) => Some((self.first_time, graphs.len() as u64)),
            ScheduleKind::Generated(g) => g.recurrent_tail(),
        }
    }

    pub fn graph_at(&self, t: u64) -> Result<WeightedDigraph> {
        if t < self.first_time {
            return Err(Error::invalid(format!(
                "time {t} precedes the first time {} of schedule '{}'",
                self.first_time, self.id
            )));
        }
        let offset = t - self.first_time;
        Ok(match &self.kind {
            ScheduleKind::Finite(graphs) => {
                let idx = (offset as usize).min(graphs.len() - 1);
                graphs[idx].clone()
            }
            ScheduleKind::Periodic(graphs) => graphs[(offset % graphs.len() as u64) as usize].clone(),
            ScheduleKind::Generated(g) => g.graph_at(t),
        })
    }
}

fn common_size(graphs: &[WeightedDigraph]) -> Result<usize> {
    let first = graphs.first().ok_or_else(|| Error::invalid("a schedule needs at least one graph"))?;
    if graphs.iter().any(|g| g.n() != first.n()) {
        return Err(Error::invalid("all graphs of a schedule must share the node count"));
    }
    Ok(first.n())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::DirectedGraph;

    fn unit(n: usize, arcs: &[(usize, usize)]) -> WeightedDigraph {
        WeightedDigraph::unit(DirectedGraph::new(n, arcs.iter().copied()).unwrap())
    }

    #[test]
    fn finite_schedule_holds_last_graph() {
        let s = GraphSchedule::finite(vec![unit(2, &[(1, 2)]), unit(2, &[(2, 1)])], 1).unwrap();
        assert!(s.graph_at(0).is_err());
        assert!(s.graph_at(1).unwrap().graph().has_arc(1, 2));
        assert!(s.graph_at(2).unwrap().graph().has_arc(2, 1));
        assert!(s.graph_at(50).unwrap().graph().has_arc(2, 1));
        assert_eq!(s.recurrent_tail(), Some((2, 1)));
    }

    #[test]
    fn periodic_schedule_wraps() {
        let s = GraphSchedule::periodic(vec![unit(2, &[(1, 2)]), unit(2, &[])], 3).unwrap();
        assert_eq!(s.period(), Some(2));
        assert_eq!(s.graph_at(3).unwrap().graph().arc_count(), 1);
        assert_eq!(s.graph_at(4).unwrap().graph().arc_count(), 0);
        assert_eq!(s.graph_at(5).unwrap().graph().arc_count(), 1);
    }

    #[test]
    fn mismatched_sizes_rejected() {
        assert!(GraphSchedule::finite(vec![unit(2, &[]), unit(3, &[])], 0).is_err());
        assert!(GraphSchedule::periodic(vec![], 0).is_err());
    }
}
