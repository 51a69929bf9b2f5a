//! Text formats: graph/schedule files in, trajectory CSV out.
//!
//! Graph files are line oriented. `#` starts a comment. The first directive is
//! `n=<int>`, followed by `arc <k> <l> [<weight>]` lines. Weights are decimals
//! or fractions `p/q`; either every arc carries one or none does.
//!
//! Optional directives: `bounds <e_min> <e_max>` declares the weight range,
//! `first_time=<int>` sets the schedule start, `periodic` repeats the graph
//! list, and `step` separates consecutive graphs of a schedule.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::dynamics::WeightedDigraph;
use crate::error::{Error, Result};
use crate::graph::DirectedGraph;
use crate::lyapunov::MonitorRecord;
use crate::schedule::GraphSchedule;
use crate::trajectory::Trajectory;

/// Contents of a graph or schedule file.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphFile {
    pub n: usize,
    pub weighted: bool,
    pub bounds: Option<(f64, f64)>,
    pub first_time: u64,
    pub periodic: bool,
    pub steps: Vec<WeightedDigraph>,
}

impl GraphFile {
    /// The single graph of a file without `step` markers.
    pub fn single(&self) -> Result<&WeightedDigraph> {
        match self.steps.as_slice() {
            [g] => Ok(g),
            _ => Err(Error::invalid(format!("file holds {} graphs, expected one", self.steps.len()))),
        }
    }

    pub fn into_schedule(self, id: impl Into<String>) -> Result<GraphSchedule> {
        let schedule = if self.periodic {
            GraphSchedule::periodic(self.steps, self.first_time)?
        } else {
            GraphSchedule::finite(self.steps, self.first_time)?
        };
        Ok(schedule.with_id(id))
    }
}

fn parse_number(token: &str, line: usize) -> Result<f64> {
    let err = || Error::Parse { line, message: format!("'{token}' is not a number") };
    let value = match token.split_once('/') {
        Some((p, q)) => {
            let p: f64 = p.parse().map_err(|_| err())?;
            let q: f64 = q.parse().map_err(|_| err())?;
            if q == 0.0 {
                return Err(Error::Parse { line, message: format!("zero denominator in '{token}'") });
            }
            p / q
        }
        None => token.parse().map_err(|_| err())?,
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(err())
    }
}

fn parse_label(token: &str, n: usize, line: usize) -> Result<usize> {
    let k: usize = token
        .parse()
        .map_err(|_| Error::Parse { line, message: format!("'{token}' is not a node label") })?;
    if k == 0 || k > n {
        return Err(Error::Parse { line, message: format!("node {k} is outside 1..={n}") });
    }
    Ok(k)
}

struct PendingArc {
    line: usize,
    k: usize,
    l: usize,
    weight: Option<f64>,
}

pub fn parse_graph_file(text: &str) -> Result<GraphFile> {
    let mut n: Option<usize> = None;
    let mut bounds = None;
    let mut first_time = 0;
    let mut periodic = false;
    let mut blocks: Vec<Vec<PendingArc>> = vec![Vec::new()];
    let mut saw_step = false;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some(nodes) = n else {
            let value = content
                .strip_prefix("n=")
                .ok_or_else(|| Error::Parse { line, message: "expected 'n=<int>' first".into() })?;
            let value: usize = value
                .trim()
                .parse()
                .map_err(|_| Error::Parse { line, message: format!("bad node count '{value}'") })?;
            if value == 0 {
                return Err(Error::Parse { line, message: "node count must be positive".into() });
            }
            n = Some(value);
            continue;
        };
        let tokens: Vec<&str> = content.split_whitespace().collect();
        match tokens.as_slice() {
            ["arc", k, l, rest @ ..] => {
                let k = parse_label(k, nodes, line)?;
                let l = parse_label(l, nodes, line)?;
                if k == l {
                    return Err(Error::Parse { line, message: format!("self-loop ({k},{k})") });
                }
                let weight = match rest {
                    [] => None,
                    [w] => {
                        let w = parse_number(w, line)?;
                        if w <= 0.0 {
                            return Err(Error::Parse {
                                line,
                                message: format!("weight of arc ({k},{l}) must be positive"),
                            });
                        }
                        Some(w)
                    }
                    _ => return Err(Error::Parse { line, message: "trailing tokens after arc".into() }),
                };
                blocks.last_mut().expect("at least one block").push(PendingArc { line, k, l, weight });
            }
            ["bounds", lo, hi] => {
                let (lo, hi) = (parse_number(lo, line)?, parse_number(hi, line)?);
                if !(lo > 0.0 && lo <= hi) {
                    return Err(Error::Parse { line, message: format!("bounds [{lo}, {hi}] invalid") });
                }
                bounds = Some((lo, hi));
            }
            ["periodic"] => periodic = true,
            ["step"] => {
                if saw_step {
                    blocks.push(Vec::new());
                }
                saw_step = true;
            }
            [directive] if directive.starts_with("first_time=") => {
                let v = &directive["first_time=".len()..];
                first_time =
                    v.parse().map_err(|_| Error::Parse { line, message: format!("bad first_time '{v}'") })?;
            }
            _ => return Err(Error::Parse { line, message: format!("unrecognized line '{content}'") }),
        }
    }

    let n =
        n.ok_or(Error::Parse { line: text.lines().count().max(1), message: "missing 'n=<int>'".into() })?;
    let all_arcs = blocks.iter().flatten();
    let weighted_count = all_arcs.clone().filter(|a| a.weight.is_some()).count();
    let total = all_arcs.clone().count();
    if weighted_count != 0 && weighted_count != total {
        let culprit = all_arcs.clone().find(|a| a.weight.is_none()).expect("mixed weights");
        return Err(Error::Parse {
            line: culprit.line,
            message: format!("arc ({},{}) has no weight while others do", culprit.k, culprit.l),
        });
    }
    let weighted = weighted_count > 0;
    let (lo, hi) = match bounds {
        Some(b) => b,
        None if weighted => all_arcs
            .clone()
            .filter_map(|a| a.weight)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), w| (lo.min(w), hi.max(w))),
        None => (1.0, 1.0),
    };
    if let Some(bad) = all_arcs.clone().find(|a| a.weight.is_some_and(|w| w < lo || w > hi)) {
        return Err(Error::Parse {
            line: bad.line,
            message: format!(
                "weight {} of arc ({},{}) lies outside [{lo}, {hi}]",
                bad.weight.unwrap(),
                bad.k,
                bad.l
            ),
        });
    }

    let mut steps = Vec::with_capacity(blocks.len());
    for block in blocks {
        let mut weights = BTreeMap::new();
        for a in &block {
            if weights.insert((a.k, a.l), a.weight.unwrap_or(1.0)).is_some() {
                return Err(Error::Parse {
                    line: a.line,
                    message: format!("duplicate arc ({},{})", a.k, a.l),
                });
            }
        }
        let graph = DirectedGraph::new(n, weights.keys().copied())?;
        let (lo, hi) = if weighted { (lo, hi) } else { (1.0, 1.0) };
        steps.push(WeightedDigraph::new(graph, weights, lo, hi)?);
    }
    Ok(GraphFile { n, weighted, bounds, first_time, periodic, steps })
}

/// Serializes a single graph in the graph text format.
pub fn write_graph(graph: &WeightedDigraph, weighted: bool) -> String {
    let mut out = format!("n={}\n", graph.n());
    if weighted {
        let (lo, hi) = graph.bounds();
        let _ = writeln!(out, "bounds {lo:?} {hi:?}");
    }
    for (&(k, l), w) in graph.weights() {
        if weighted {
            let _ = writeln!(out, "arc {k} {l} {w:?}");
        } else {
            let _ = writeln!(out, "arc {k} {l}");
        }
    }
    out
}

/// Formats a float with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Trajectory CSV: `t,x1..xn[,y1..yn],diameter,contained,vertices`, one row per
/// stored state. `records` must come from monitoring the same trajectory.
pub fn trajectory_csv(traj: &Trajectory, records: &[MonitorRecord]) -> Result<String> {
    if records.len() != traj.states().len() {
        return Err(Error::invalid("monitor records do not match the trajectory"));
    }
    let first = traj.final_state();
    let (n, d) = (first.n(), first.d());
    let mut out = String::from("t");
    for axis in ["x", "y"].iter().take(d) {
        for i in 1..=n {
            let _ = write!(out, ",{axis}{i}");
        }
    }
    out.push_str(",diameter,contained,vertices\n");
    for ((t, state), rec) in traj.times().iter().zip(traj.states()).zip(records) {
        let _ = write!(out, "{t}");
        for c in 0..d {
            for i in 0..n {
                let _ = write!(out, ",{}", fmt_f64(state.point(i)[c]));
            }
        }
        let _ = writeln!(out, ",{},{},{}", fmt_f64(rec.diameter), rec.contained, rec.vertex_count);
    }
    Ok(out)
}
