use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;

use consensus_lab::dynamics::build_update_matrix;
use consensus_lab::format::{parse_graph_file, trajectory_csv};
use consensus_lab::graph::{
    find_root, is_bidirectional, is_weakly_connected, union_across, weakly_connected_oracle,
};
use consensus_lab::lyapunov::{monitor_trajectory, violation_count};
use consensus_lab::scenarios::{verify_counterexample, CounterexampleReport};
use consensus_lab::simulator::{
    aggregate, detect_consensus, probe_sample, simulate, ProbeConfig, ProbeReport,
};
use consensus_lab::{AgentState, IntervalSpec, StochasticMatrix};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ProbeSettings, RunConfig, ScheduleSpec};
use crate::rational::{reconstruct, Fraction, DENOMINATOR_CAP};
use crate::CliError;

/// Largest node count for which `connectivity` also runs the subset oracle.
pub const ORACLE_CROSS_CHECK_MAX: usize = 7;

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Config(format!("cannot write {}: {e}", path.display()))
}

fn emit(out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes()).map_err(|e| CliError::Config(format!("cannot write output: {e}")))
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulateSummary {
    pub schedule: String,
    pub map: String,
    pub n: usize,
    pub d: usize,
    pub t0: u64,
    pub steps: u64,
    pub seed: u64,
    pub tol: f64,
    pub initial_disagreement: f64,
    pub final_disagreement: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub consensus_time: Option<u64>,
    pub violations: usize,
}

/// Runs one trajectory, writes the CSV (if requested) and the JSON summary.
/// The summary is printed to `out` and also written to `config.summary` if set.
pub fn cmd_simulate(config: &RunConfig, out: &mut dyn Write) -> Result<SimulateSummary, CliError> {
    let schedule = config.schedule.load()?;
    let map = config.map.build()?;
    let t0 = config.t0.unwrap_or(schedule.first_time());
    let x0 = config.initial.build(schedule.n(), config.dim, config.seed)?;
    let traj = simulate(&schedule, &map, &x0, t0, config.steps)?;
    let records = monitor_trajectory(&traj, config.slack);
    let summary = SimulateSummary {
        schedule: schedule.id().to_string(),
        map: map.id(),
        n: x0.n(),
        d: x0.d(),
        t0,
        steps: config.steps,
        seed: config.seed,
        tol: config.tol,
        initial_disagreement: traj.disagreements()[0],
        final_disagreement: *traj.disagreements().last().expect("trajectory has a state"),
        consensus_time: detect_consensus(&traj, config.tol),
        violations: violation_count(&records),
    };
    if let Some(path) = &config.csv {
        fs::write(path, trajectory_csv(&traj, &records)?).map_err(|e| io_err(path, e))?;
    }
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n";
    if let Some(path) = &config.summary {
        fs::write(path, &json).map_err(|e| io_err(path, e))?;
    }
    emit(out, &json)?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConnectivityReport {
    pub interval: String,
    pub n: usize,
    pub weakly_connected: bool,
    pub root: Option<usize>,
    pub bidirectional: bool,
    /// Verdict of the subset oracle, for small graphs.
    pub oracle: Option<bool>,
}

impl ConnectivityReport {
    pub fn line(&self) -> String {
        let mut s = format!("weakly_connected={}", self.weakly_connected);
        match self.root {
            Some(r) => {
                let _ = write!(s, " root={r}");
            }
            None => s.push_str(" root=none"),
        }
        let _ = write!(s, " bidirectional={}", self.bidirectional);
        s
    }
}

/// Weak connectivity of the union of the schedule's graphs over `[from, to]`
/// (`to = None` means the whole tail).
pub fn cmd_connectivity(
    spec: &ScheduleSpec,
    from: Option<u64>,
    to: Option<u64>,
    out: &mut dyn Write,
) -> Result<ConnectivityReport, CliError> {
    let schedule = spec.load()?;
    let start = from.unwrap_or(schedule.first_time());
    let interval = match to {
        Some(end) => IntervalSpec::bounded(start, end)?,
        None => IntervalSpec::unbounded(start),
    };
    let graph = union_across(&schedule, interval)?;
    let weakly_connected = is_weakly_connected(&graph);
    let oracle =
        if graph.n() <= ORACLE_CROSS_CHECK_MAX { Some(weakly_connected_oracle(&graph)?) } else { None };
    let report = ConnectivityReport {
        interval: interval.to_string(),
        n: graph.n(),
        weakly_connected,
        root: find_root(&graph),
        bidirectional: is_bidirectional(&graph),
        oracle,
    };
    let mut text = report.line() + "\n";
    match oracle {
        Some(v) => {
            let _ = writeln!(text, "oracle={v} agree={}", v == weakly_connected);
        }
        None => text.push_str("oracle=skipped\n"),
    }
    emit(out, &text)?;
    if oracle.is_some_and(|v| v != weakly_connected) {
        return Err(CliError::Verification(format!(
            "search and subset oracle disagree on the union over {interval}"
        )));
    }
    Ok(report)
}

/// Prints the `p, t_p, v(p), residual` table; fails if a residual exceeds its tolerance.
pub fn cmd_counterexample(p_max: usize, out: &mut dyn Write) -> Result<CounterexampleReport, CliError> {
    if p_max < 2 {
        return Err(CliError::Config(format!("p_max must be at least 2, got {p_max}")));
    }
    let report = verify_counterexample(p_max)?;
    let mut text = String::from("p,t_p,v,residual\n");
    for row in &report.rows {
        let _ = writeln!(text, "{},{},{:.17},{:.3e}", row.p, row.t_p, row.v, row.residual);
    }
    let _ = writeln!(text, "# v({p_max}) = {:.12}", report.v_last);
    emit(out, &text)?;
    if let Some(p) = report.first_failure {
        return Err(CliError::Verification(format!("recursion residual out of tolerance at p={p}")));
    }
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct MatrixReport {
    pub matrix: StochasticMatrix,
    /// Exact form of each entry when one with a small denominator exists.
    pub fractions: Vec<Vec<Option<Fraction>>>,
}

/// Prints the averaging matrix of a single weighted graph, as decimals and,
/// where recoverable, as fractions.
pub fn cmd_matrix(path: &Path, out: &mut dyn Write) -> Result<MatrixReport, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read graph file {}: {e}", path.display())))?;
    let file = parse_graph_file(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let matrix = build_update_matrix(file.single()?);
    let fractions: Vec<Vec<Option<Fraction>>> =
        matrix.rows().map(|row| row.iter().map(|&v| reconstruct(v, DENOMINATOR_CAP)).collect()).collect();
    let mut text = String::from("# decimal\n");
    for row in matrix.rows() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.17}")).collect();
        let _ = writeln!(text, "{}", cells.join(" "));
    }
    text.push_str("# rational\n");
    for (row, exact) in matrix.rows().zip(&fractions) {
        let cells: Vec<String> = row
            .iter()
            .zip(exact)
            .map(|(v, f)| f.map_or_else(|| format!("{v:.17}"), |f| f.to_string()))
            .collect();
        let _ = writeln!(text, "{}", cells.join(" "));
    }
    emit(out, &text)?;
    Ok(MatrixReport { matrix, fractions })
}

/// Attractivity probe; samples run on a pool of `settings.jobs` threads and
/// the report does not depend on the pool size.
pub fn cmd_probe(settings: &ProbeSettings, out: &mut dyn Write) -> Result<ProbeReport, CliError> {
    let schedule = settings.schedule.load()?;
    let map = settings.map.build()?;
    let n = schedule.n();
    let center = match &settings.center {
        Some(v) => AgentState::new(settings.dim, v.clone())?,
        None => AgentState::new(settings.dim, vec![0.0; n * settings.dim])?,
    };
    if center.n() != n {
        return Err(CliError::Config(format!("center has {} agents, schedule has {n}", center.n())));
    }
    let config = ProbeConfig {
        center,
        radius: settings.radius,
        samples: settings.samples,
        t0: settings.t0.unwrap_or(schedule.first_time()),
        horizon: settings.horizon,
        tol: settings.tol,
        seed: settings.seed,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(settings.jobs)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {} worker threads: {e}", settings.jobs)))?;
    let per_sample = pool.install(|| {
        (0..config.samples)
            .into_par_iter()
            .map(|i| probe_sample(&schedule, &map, &config, i))
            .collect::<consensus_lab::Result<Vec<_>>>()
    })?;
    let report = aggregate(&config, per_sample);
    let json = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    match &settings.out {
        Some(path) => fs::write(path, &json).map_err(|e| io_err(path, e))?,
        None => emit(out, &json)?,
    }
    Ok(report)
}
