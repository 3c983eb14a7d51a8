//! Flat `key = value` experiment configuration.
//!
//! One assignment per line, keys may carry a dotted section prefix, `#`
//! starts a comment. Lists are comma-separated. Every key has a default
//! except `mode`.

use std::collections::HashMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use povm_lab::annealer::AnnealConfig;
use povm_lab::basis::{gell_mann_basis, BlochVector, ParameterPattern};
use povm_lab::statespace::ClusterPolicy;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("missing required key `{0}`")]
    Missing(&'static str),
    #[error("{0}")]
    Inconsistent(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Anneal,
    Refine,
    Verify,
    GridInfo,
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "anneal" => Ok(Mode::Anneal),
            "refine" => Ok(Mode::Refine),
            "verify" => Ok(Mode::Verify),
            "gridinfo" => Ok(Mode::GridInfo),
            other => Err(format!("unknown mode `{other}` (anneal, refine, verify, gridinfo)")),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Anneal => "anneal",
            Mode::Refine => "refine",
            Mode::Verify => "verify",
            Mode::GridInfo => "gridinfo",
        })
    }
}

/// Which known coordinates the pattern fixes.
#[derive(Debug, Clone, PartialEq)]
pub enum KnownIndices {
    Diagonal,
    List(Vec<usize>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyChoice {
    /// Reference cluster when `grid.reference` is set, else the largest.
    Auto,
    Largest,
    Reference,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSettings {
    pub points_per_axis: usize,
    /// `None` uses the pure-state radius.
    pub bound: Option<f64>,
    pub cells: usize,
    pub policy: PolicyChoice,
    pub reference: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefineSettings {
    pub weight: f64,
    pub restarts: usize,
    pub max_evaluations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputPaths {
    pub dir: PathBuf,
    pub trace: String,
    pub povm: String,
    pub report: String,
    pub phases: String,
    pub clusters: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub dim: usize,
    pub known_indices: KnownIndices,
    /// Empty means all known values are zero.
    pub known_values: Vec<f64>,
    pub grid: GridSettings,
    pub anneal: AnnealConfig<f64>,
    /// Radius of the random starting POVM, as a fraction of the pure-state
    /// shape radius.
    pub init_radius: f64,
    /// Start from this POVM file instead of a random one.
    pub initial_povm: Option<PathBuf>,
    pub refine: RefineSettings,
    pub report_tolerance: f64,
    pub output: OutputPaths,
}

impl ExperimentConfig {
    /// Defaults for everything but the mode.
    pub fn defaults(mode: Mode) -> Self {
        ExperimentConfig {
            mode,
            dim: 3,
            known_indices: KnownIndices::Diagonal,
            known_values: Vec::new(),
            grid: GridSettings {
                points_per_axis: 7,
                bound: None,
                cells: 10,
                policy: PolicyChoice::Auto,
                reference: None,
            },
            anneal: AnnealConfig::default(),
            init_radius: 0.5,
            initial_povm: None,
            refine: RefineSettings {
                weight: 1.0,
                restarts: 5,
                max_evaluations: povm_lab::rankone::DEFAULT_MAX_EVALUATIONS,
            },
            report_tolerance: 1e-6,
            output: OutputPaths {
                dir: PathBuf::from("out"),
                trace: "trace.csv".into(),
                povm: "best_povm.txt".into(),
                report: "report.txt".into(),
                phases: "phases.csv".into(),
                clusters: "clusters.tsv".into(),
            },
        }
    }

    pub fn pattern(&self) -> Result<ParameterPattern<f64>, ConfigError> {
        let basis = gell_mann_basis::<f64>(self.dim).map_err(|e| ConfigError::Inconsistent(e.to_string()))?;
        let known = match &self.known_indices {
            KnownIndices::Diagonal => basis.diagonal_indices(),
            KnownIndices::List(v) => v.clone(),
        };
        let values = if self.known_values.is_empty() {
            vec![0.0; known.len()]
        } else {
            self.known_values.clone()
        };
        ParameterPattern::new(self.dim, known, values).map_err(|e| ConfigError::Inconsistent(format!("pattern: {e}")))
    }

    pub fn cluster_policy(&self) -> ClusterPolicy<f64> {
        match (self.grid.policy, &self.grid.reference) {
            (PolicyChoice::Largest, _) | (PolicyChoice::Auto, None) => ClusterPolicy::Largest,
            (_, Some(r)) => ClusterPolicy::Reference(BlochVector::new(r.clone())),
            // Rejected in validation.
            (PolicyChoice::Reference, None) => ClusterPolicy::Largest,
        }
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Inconsistent(m));
        if !(2..=4).contains(&self.dim) {
            return bad(format!("dim must be 2, 3 or 4, got {}", self.dim));
        }
        let pattern = self.pattern()?;
        if pattern.unknown_count() == 0 {
            return bad("pattern leaves no unknown coordinate".into());
        }
        let count = self.dim * self.dim - 1;
        if let Some(r) = &self.grid.reference {
            if r.len() != count {
                return bad(format!("grid.reference needs {count} coordinates, got {}", r.len()));
            }
        }
        if self.grid.policy == PolicyChoice::Reference && self.grid.reference.is_none() {
            return bad("grid.policy = reference requires grid.reference".into());
        }
        let points = (self.grid.points_per_axis as f64).powi(pattern.unknown_count() as i32);
        if points > povm_lab::statespace::GRID_BUDGET {
            return bad(format!(
                "grid of {points} candidates exceeds the budget of {}",
                povm_lab::statespace::GRID_BUDGET
            ));
        }
        self.anneal.check().map_err(|e| ConfigError::Inconsistent(format!("anneal: {e}")))?;
        if self.mode == Mode::Refine && self.known_indices != KnownIndices::Diagonal {
            let diag = gell_mann_basis::<f64>(self.dim).expect("checked").diagonal_indices();
            if pattern.known_indices() != diag.as_slice() {
                return bad("refine mode needs the diagonal-known pattern".into());
            }
        }
        Ok(())
    }
}

fn parse_list<T: FromStr>(raw: &str) -> Result<Vec<T>, String> {
    if raw.trim().is_empty() {
        return Ok(Vec::new());
    }
    raw.split(',')
        .map(|s| s.trim().parse::<T>().map_err(|_| format!("cannot parse list entry `{}`", s.trim())))
        .collect()
}

fn parse_num<T: FromStr>(raw: &str) -> Result<T, String> {
    raw.parse().map_err(|_| format!("cannot parse `{raw}`"))
}

fn at_least<T: FromStr + PartialOrd + fmt::Display>(raw: &str, min: T) -> Result<T, String> {
    let v = parse_num::<T>(raw)?;
    if v < min {
        return Err(format!("value {v} out of range (minimum {min})"));
    }
    Ok(v)
}

fn positive(raw: &str) -> Result<f64, String> {
    let v = parse_num::<f64>(raw)?;
    if !(v > 0.0 && v.is_finite()) {
        return Err(format!("value {v} out of range (must be positive)"));
    }
    Ok(v)
}

fn apply(cfg: &mut ExperimentConfig, key: &str, raw: &str) -> Result<(), String> {
    match key {
        "mode" => cfg.mode = raw.parse()?,
        "dim" => cfg.dim = at_least(raw, 2)?,
        "pattern.known_indices" => {
            cfg.known_indices = if raw == "diagonal" {
                KnownIndices::Diagonal
            } else {
                KnownIndices::List(parse_list(raw)?)
            }
        }
        "pattern.known_values" => cfg.known_values = parse_list(raw)?,
        "grid.points_per_axis" => cfg.grid.points_per_axis = at_least(raw, 2)?,
        "grid.bound" => cfg.grid.bound = if raw == "auto" { None } else { Some(positive(raw)?) },
        "grid.cells" => cfg.grid.cells = at_least(raw, 1)?,
        "grid.policy" => {
            cfg.grid.policy = match raw {
                "auto" => PolicyChoice::Auto,
                "largest" => PolicyChoice::Largest,
                "reference" => PolicyChoice::Reference,
                other => return Err(format!("unknown cluster policy `{other}` (auto, largest, reference)")),
            }
        }
        "grid.reference" => cfg.grid.reference = if raw == "none" { None } else { Some(parse_list(raw)?) },
        "anneal.total_steps" => cfg.anneal.total_steps = parse_num(raw)?,
        "anneal.s0" => cfg.anneal.s0 = positive(raw)?,
        "anneal.s_decay" => cfg.anneal.s_decay = positive(raw)?,
        "anneal.t0" => cfg.anneal.t0 = positive(raw)?,
        "anneal.t_decay" => cfg.anneal.t_decay = positive(raw)?,
        "anneal.reheat_every" => cfg.anneal.reheat_every = at_least(raw, 1)?,
        "anneal.reheat_factor" => cfg.anneal.reheat_factor = at_least(raw, 1.0)?,
        "anneal.max_resample" => cfg.anneal.max_resample = at_least(raw, 1)?,
        "anneal.seed" => cfg.anneal.rng_seed = parse_num(raw)?,
        "anneal.trace_every" => cfg.anneal.trace_every = at_least(raw, 1)?,
        "anneal.perturb_a0" => cfg.anneal.perturb_a0 = parse_num(raw)?,
        "anneal.init_radius" => {
            let r = positive(raw)?;
            if r >= 1.0 {
                return Err(format!("value {r} out of range (must be below 1)"));
            }
            cfg.init_radius = r;
        }
        "anneal.initial_povm" => cfg.initial_povm = if raw == "none" { None } else { Some(raw.into()) },
        "refine.weight" => cfg.refine.weight = at_least(raw, 0.0)?,
        "refine.restarts" => cfg.refine.restarts = at_least(raw, 1)?,
        "refine.max_evaluations" => cfg.refine.max_evaluations = at_least(raw, 1)?,
        "report.tolerance" => cfg.report_tolerance = positive(raw)?,
        "output.dir" => cfg.output.dir = raw.into(),
        "output.trace" => cfg.output.trace = raw.into(),
        "output.povm" => cfg.output.povm = raw.into(),
        "output.report" => cfg.output.report = raw.into(),
        "output.phases" => cfg.output.phases = raw.into(),
        "output.clusters" => cfg.output.clusters = raw.into(),
        other => return Err(format!("unknown key `{other}`")),
    }
    Ok(())
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    // The mode is only a placeholder until the `mode` line is seen.
    let mut cfg = ExperimentConfig::defaults(Mode::Verify);
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw_line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Line {
            line,
            message: format!("expected `key = value`, found `{content}`"),
        })?;
        let key = key.trim();
        if let Some(first) = seen.insert(key.to_string(), line) {
            return Err(ConfigError::Line {
                line,
                message: format!("key `{key}` already set on line {first}"),
            });
        }
        apply(&mut cfg, key, value.trim()).map_err(|message| ConfigError::Line {
            line,
            message: format!("{key}: {message}"),
        })?;
    }
    if !seen.contains_key("mode") {
        return Err(ConfigError::Missing("mode"));
    }
    cfg.validate()?;
    Ok(cfg)
}
