//! Flat `key=value` configuration with command-line overrides.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use consensus_lab::dynamics::{Gain, Gains, DEFAULT_SUBSTEPS};
use consensus_lab::format::parse_graph_file;
use consensus_lab::scenarios::parse_scenario;
use consensus_lab::{AgentState, GraphSchedule, UpdateMap};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::CliError;

pub const SEED_ENV: &str = "CONSENSUS_LAB_SEED";

/// Raw settings: keys from a config file, overridden by flags.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Settings {
    /// Parses `key=value` lines; `#` starts a comment, blank lines are skipped.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("config line {}: expected key=value", i + 1)))?;
            let key = k.trim().replace('-', "_");
            if key.is_empty() {
                return Err(CliError::Config(format!("config line {}: empty key", i + 1)));
            }
            values.insert(key, v.trim().to_string());
        }
        Ok(Settings { values })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Settings::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.values.insert(key.replace('-', "_"), value.into());
    }

    /// Applies every `Some` override on top of the current values.
    pub fn overlay<'a>(&mut self, overrides: impl IntoIterator<Item = (&'a str, Option<String>)>) {
        for (k, v) in overrides {
            if let Some(v) = v {
                self.set(k, v);
            }
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn require(&self, key: &str) -> Result<&str, CliError> {
        self.get(key).ok_or_else(|| CliError::Config(format!("missing required setting '{key}'")))
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        self.get(key)
            .map(|v| v.parse().map_err(|_| CliError::Config(format!("setting '{key}': cannot parse '{v}'"))))
            .transpose()
    }

    fn reject_unknown(&self, allowed: &[&str]) -> Result<(), CliError> {
        match self.values.keys().find(|k| !allowed.contains(&k.as_str())) {
            Some(k) => Err(CliError::Config(format!("unknown setting '{k}'"))),
            None => Ok(()),
        }
    }
}

/// Where the communication graphs come from.
#[derive(Debug, Clone, PartialEq)]
pub enum ScheduleSpec {
    File(PathBuf),
    Scenario(String),
}

impl ScheduleSpec {
    fn from_settings(s: &Settings) -> Result<Self, CliError> {
        match (s.get("graph"), s.get("scenario")) {
            (Some(p), None) => Ok(ScheduleSpec::File(PathBuf::from(p))),
            (None, Some(name)) => Ok(ScheduleSpec::Scenario(name.to_string())),
            (Some(_), Some(_)) => Err(CliError::Config("give either 'graph' or 'scenario', not both".into())),
            (None, None) => Err(CliError::Config("missing 'graph' or 'scenario'".into())),
        }
    }

    pub fn load(&self) -> Result<GraphSchedule, CliError> {
        match self {
            ScheduleSpec::File(path) => {
                let text = fs::read_to_string(path).map_err(|e| {
                    CliError::Config(format!("cannot read graph file {}: {e}", path.display()))
                })?;
                let file = parse_graph_file(&text)
                    .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
                let id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                Ok(file.into_schedule(id)?)
            }
            ScheduleSpec::Scenario(name) => Ok(parse_scenario(name)?),
        }
    }
}

/// Update map name plus parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct MapSpec {
    pub name: String,
    pub substeps: usize,
    pub gain: String,
}

impl MapSpec {
    fn from_settings(s: &Settings) -> Result<Self, CliError> {
        let substeps = s.parsed("substeps")?.unwrap_or(DEFAULT_SUBSTEPS);
        if substeps == 0 {
            return Err(CliError::Config("substeps must be at least 1".into()));
        }
        let spec = MapSpec {
            name: s.get("map").unwrap_or("linear").to_string(),
            substeps,
            gain: s.get("gain").unwrap_or("tanh").to_string(),
        };
        spec.build()?;
        Ok(spec)
    }

    pub fn build(&self) -> Result<UpdateMap, CliError> {
        Ok(match self.name.as_str() {
            "linear" => UpdateMap::LinearAverage,
            "kuramoto" => UpdateMap::KuramotoTime1 { substeps: self.substeps },
            "nonlinear" => UpdateMap::NonlinearConsensus {
                gains: Gains::uniform(Gain::named(&self.gain)?),
                substeps: self.substeps,
            },
            "vicsek" => UpdateMap::VicsekHeading,
            "max" => UpdateMap::MaxUpdate,
            other => {
                return Err(CliError::Config(format!(
                    "unknown map '{other}' (linear, kuramoto, nonlinear, vicsek, max)"
                )))
            }
        })
    }
}

/// Initial state: explicit numbers, a file of numbers, or seeded uniform draws.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialSpec {
    Values(Vec<f64>),
    File(PathBuf),
    Random { lo: f64, hi: f64 },
}

fn parse_numbers(text: &str, origin: &str) -> Result<Vec<f64>, CliError> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| CliError::Config(format!("{origin}: '{t}' is not a finite number")))
        })
        .collect()
}

impl InitialSpec {
    fn from_settings(s: &Settings) -> Result<Self, CliError> {
        match (s.get("x0"), s.get("x0_file")) {
            (Some(_), Some(_)) => Err(CliError::Config("give either 'x0' or 'x0_file', not both".into())),
            (None, Some(p)) => Ok(InitialSpec::File(PathBuf::from(p))),
            (Some(v), None) if v.starts_with("random") => {
                let range = v.trim_start_matches("random").trim_start_matches(':');
                if range.is_empty() {
                    return Ok(InitialSpec::Random { lo: 0.0, hi: 1.0 });
                }
                match parse_numbers(range, "x0")?.as_slice() {
                    [lo, hi] if lo < hi => Ok(InitialSpec::Random { lo: *lo, hi: *hi }),
                    _ => Err(CliError::Config("x0=random:lo,hi needs lo < hi".into())),
                }
            }
            (Some(v), None) => Ok(InitialSpec::Values(parse_numbers(v, "x0")?)),
            (None, None) => Ok(InitialSpec::Random { lo: 0.0, hi: 1.0 }),
        }
    }

    /// Materializes the state for `n` agents in dimension `d`. Explicit values
    /// list agents in order, `d` coordinates each.
    pub fn build(&self, n: usize, d: usize, seed: u64) -> Result<AgentState, CliError> {
        let coords = match self {
            InitialSpec::Values(v) => v.clone(),
            InitialSpec::File(path) => {
                let text = fs::read_to_string(path).map_err(|e| {
                    CliError::Config(format!("cannot read state file {}: {e}", path.display()))
                })?;
                parse_numbers(&text, &path.display().to_string())?
            }
            InitialSpec::Random { lo, hi } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                (0..n * d).map(|_| rng.gen_range(*lo..*hi)).collect()
            }
        };
        if coords.len() != n * d {
            return Err(CliError::Config(format!(
                "initial state has {} numbers, expected {} ({n} agents x {d})",
                coords.len(),
                n * d
            )));
        }
        Ok(AgentState::new(d, coords)?)
    }
}

/// Seed precedence: explicit setting, then `CONSENSUS_LAB_SEED`, then 0.
fn resolve_seed(s: &Settings) -> Result<u64, CliError> {
    if let Some(seed) = s.parsed("seed")? {
        return Ok(seed);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Config(format!("{SEED_ENV}='{v}' is not an unsigned integer"))),
        Err(_) => Ok(0),
    }
}

fn positive(key: &str, v: f64) -> Result<f64, CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::Config(format!("setting '{key}' must be positive")))
    }
}

fn dimension(s: &Settings) -> Result<usize, CliError> {
    match s.parsed::<usize>("dim")?.unwrap_or(1) {
        d @ (1 | 2) => Ok(d),
        d => Err(CliError::Config(format!("dim must be 1 or 2, got {d}"))),
    }
}

pub const SIMULATE_KEYS: &[&str] = &[
    "graph", "scenario", "map", "substeps", "gain", "dim", "x0", "x0_file", "t0", "steps", "tol", "seed",
    "slack", "csv", "summary",
];

/// Everything `simulate` needs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub schedule: ScheduleSpec,
    pub map: MapSpec,
    pub dim: usize,
    pub initial: InitialSpec,
    pub t0: Option<u64>,
    pub steps: u64,
    pub tol: f64,
    pub slack: f64,
    pub seed: u64,
    pub csv: Option<PathBuf>,
    pub summary: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_settings(s: &Settings) -> Result<Self, CliError> {
        s.reject_unknown(SIMULATE_KEYS)?;
        let steps: u64 = s
            .require("steps")?
            .parse()
            .map_err(|_| CliError::Config("setting 'steps' must be a positive integer".into()))?;
        if steps == 0 {
            return Err(CliError::Config("setting 'steps' must be a positive integer".into()));
        }
        Ok(RunConfig {
            schedule: ScheduleSpec::from_settings(s)?,
            map: MapSpec::from_settings(s)?,
            dim: dimension(s)?,
            initial: InitialSpec::from_settings(s)?,
            t0: s.parsed("t0")?,
            steps,
            tol: positive("tol", s.parsed("tol")?.unwrap_or(1e-6))?,
            slack: s.parsed("slack")?.unwrap_or(consensus_lab::lyapunov::DEFAULT_SLACK),
            seed: resolve_seed(s)?,
            csv: s.get("csv").map(PathBuf::from),
            summary: s.get("summary").map(PathBuf::from),
        })
    }
}

pub const PROBE_KEYS: &[&str] = &[
    "graph", "scenario", "map", "substeps", "gain", "dim", "center", "radius", "samples", "t0", "horizon",
    "tol", "seed", "jobs", "out",
];

/// Everything `probe` needs.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSettings {
    pub schedule: ScheduleSpec,
    pub map: MapSpec,
    pub dim: usize,
    pub center: Option<Vec<f64>>,
    pub radius: f64,
    pub samples: usize,
    pub t0: Option<u64>,
    pub horizon: u64,
    pub tol: f64,
    pub seed: u64,
    pub jobs: usize,
    pub out: Option<PathBuf>,
}

impl ProbeSettings {
    pub fn from_settings(s: &Settings) -> Result<Self, CliError> {
        s.reject_unknown(PROBE_KEYS)?;
        let samples = s.parsed("samples")?.unwrap_or(20);
        let horizon = s.parsed("horizon")?.unwrap_or(1000);
        let jobs = s.parsed("jobs")?.unwrap_or(1);
        if samples == 0 || horizon == 0 || jobs == 0 {
            return Err(CliError::Config("samples, horizon and jobs must be positive".into()));
        }
        Ok(ProbeSettings {
            schedule: ScheduleSpec::from_settings(s)?,
            map: MapSpec::from_settings(s)?,
            dim: dimension(s)?,
            center: s.get("center").map(|v| parse_numbers(v, "center")).transpose()?,
            radius: positive("radius", s.parsed("radius")?.unwrap_or(0.5))?,
            samples,
            t0: s.parsed("t0")?,
            horizon,
            tol: positive("tol", s.parsed("tol")?.unwrap_or(1e-6))?,
            seed: resolve_seed(s)?,
            jobs,
            out: s.get("out").map(PathBuf::from),
        })
    }
}
