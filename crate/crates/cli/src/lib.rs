//! Command-line front end for `consensus-lab`.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 verification
//! failure (monitor violations, recursion mismatch, oracle disagreement).

pub mod commands;
pub mod config;
pub mod rational;

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::{cmd_connectivity, cmd_counterexample, cmd_matrix, cmd_probe, cmd_simulate};
pub use config::{ProbeSettings, RunConfig, ScheduleSpec, Settings};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Core(#[from] consensus_lab::Error),
    #[error("{0}")]
    Verification(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Core(_) => 1,
            CliError::Verification(_) => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "consensus-lab", version, about = "Consensus under switching directed communication graphs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one trajectory, monitor the hull, write CSV and JSON summary.
    Simulate(SimulateArgs),
    /// Weak connectivity of the union of a schedule's graphs over an interval.
    Connectivity(ConnectivityArgs),
    /// Reproduce the non-converging bidirectional schedule.
    Counterexample {
        #[arg(long, default_value_t = 20)]
        p_max: usize,
    },
    /// Print the averaging matrix of a weighted graph file.
    Matrix {
        #[arg(long)]
        graph: PathBuf,
    },
    /// Simulate random perturbations of a state and report convergence.
    Probe(ProbeArgs),
}

/// Settings shared by `simulate` and `probe`; each flag overrides the same key
/// in `--config`.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Flat key=value config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Graph or schedule file.
    #[arg(long)]
    pub graph: Option<String>,
    /// Named scenario, e.g. `counterexample`, `windowed:n=4,T=3,seed=7`, `stretching:n=3`.
    #[arg(long)]
    pub scenario: Option<String>,
    /// linear | kuramoto | nonlinear | vicsek | max
    #[arg(long)]
    pub map: Option<String>,
    /// RK4 substeps per unit time for kuramoto and nonlinear.
    #[arg(long)]
    pub substeps: Option<String>,
    /// identity | cubic | tanh | sinh
    #[arg(long)]
    pub gain: Option<String>,
    /// State dimension (1 or 2).
    #[arg(long)]
    pub dim: Option<String>,
    #[arg(long)]
    pub t0: Option<String>,
    #[arg(long)]
    pub tol: Option<String>,
    /// Defaults to $CONSENSUS_LAB_SEED, then 0.
    #[arg(long)]
    pub seed: Option<String>,
}

impl CommonArgs {
    fn overrides(&self) -> Vec<(&'static str, Option<String>)> {
        vec![
            ("graph", self.graph.clone()),
            ("scenario", self.scenario.clone()),
            ("map", self.map.clone()),
            ("substeps", self.substeps.clone()),
            ("gain", self.gain.clone()),
            ("dim", self.dim.clone()),
            ("t0", self.t0.clone()),
            ("tol", self.tol.clone()),
            ("seed", self.seed.clone()),
        ]
    }

    fn settings(&self, extra: Vec<(&'static str, Option<String>)>) -> Result<Settings, CliError> {
        let mut s = match &self.config {
            Some(path) => Settings::load(path)?,
            None => Settings::default(),
        };
        s.overlay(self.overrides());
        s.overlay(extra);
        Ok(s)
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Initial state: numbers agent by agent, or `random[:lo,hi]`.
    #[arg(long)]
    pub x0: Option<String>,
    #[arg(long)]
    pub x0_file: Option<String>,
    #[arg(long)]
    pub steps: Option<String>,
    /// Containment slack of the hull monitor.
    #[arg(long)]
    pub slack: Option<String>,
    /// Trajectory CSV output path.
    #[arg(long)]
    pub csv: Option<String>,
    /// JSON summary output path (the summary is also printed).
    #[arg(long)]
    pub summary: Option<String>,
}

impl SimulateArgs {
    pub fn run_config(&self) -> Result<RunConfig, CliError> {
        let s = self.common.settings(vec![
            ("x0", self.x0.clone()),
            ("x0_file", self.x0_file.clone()),
            ("steps", self.steps.clone()),
            ("slack", self.slack.clone()),
            ("csv", self.csv.clone()),
            ("summary", self.summary.clone()),
        ])?;
        RunConfig::from_settings(&s)
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct ProbeArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Center state, agent by agent (default: origin).
    #[arg(long)]
    pub center: Option<String>,
    #[arg(long)]
    pub radius: Option<String>,
    #[arg(long)]
    pub samples: Option<String>,
    #[arg(long)]
    pub horizon: Option<String>,
    /// Worker threads for independent samples.
    #[arg(long)]
    pub jobs: Option<String>,
    /// JSON report path (default: standard output).
    #[arg(long)]
    pub out: Option<String>,
}

impl ProbeArgs {
    pub fn probe_settings(&self) -> Result<ProbeSettings, CliError> {
        let s = self.common.settings(vec![
            ("center", self.center.clone()),
            ("radius", self.radius.clone()),
            ("samples", self.samples.clone()),
            ("horizon", self.horizon.clone()),
            ("jobs", self.jobs.clone()),
            ("out", self.out.clone()),
        ])?;
        ProbeSettings::from_settings(&s)
    }
}

#[derive(Debug, Clone, Args)]
pub struct ConnectivityArgs {
    #[arg(long, conflicts_with = "scenario", required_unless_present = "scenario")]
    pub graph: Option<PathBuf>,
    #[arg(long)]
    pub scenario: Option<String>,
    /// First time of the interval (default: the schedule's first time).
    #[arg(long)]
    pub from: Option<u64>,
    /// Last time, inclusive (default: the whole tail).
    #[arg(long)]
    pub to: Option<u64>,
}

fn dispatch(command: &Command, out: &mut dyn Write) -> Result<(), CliError> {
    match command {
        Command::Simulate(args) => {
            let summary = cmd_simulate(&args.run_config()?, out)?;
            if summary.violations > 0 {
                return Err(CliError::Verification(format!(
                    "{} hull containment violation(s)",
                    summary.violations
                )));
            }
        }
        Command::Connectivity(args) => {
            let spec = match (&args.graph, &args.scenario) {
                (Some(p), _) => ScheduleSpec::File(p.clone()),
                (None, Some(s)) => ScheduleSpec::Scenario(s.clone()),
                (None, None) => return Err(CliError::Config("missing --graph or --scenario".into())),
            };
            cmd_connectivity(&spec, args.from, args.to, out)?;
        }
        Command::Counterexample { p_max } => {
            cmd_counterexample(*p_max, out)?;
        }
        Command::Matrix { graph } => {
            cmd_matrix(graph, out)?;
        }
        Command::Probe(args) => {
            cmd_probe(&args.probe_settings()?, out)?;
        }
    }
    Ok(())
}

/// Runs a parsed command, reporting errors on `err`. Returns the exit code.
pub fn run(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    match dispatch(&cli.command, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
