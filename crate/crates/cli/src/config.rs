//! Run configuration: a TOML file with `[nonlinearity]`, `[grid]`, `[problem]`,
//! `[solver]` and `[output]` sections.
//!
//! Unknown keys, type mismatches and out-of-range values are errors that carry
//! the line of the offending key when it can be located.

use std::fmt;
use std::path::{Path, PathBuf};

use pohozaev_core::{Init, NonlinearitySpec, SolverConfig};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    FixedMu,
    Mass,
    Product,
    Scan,
    Legendre,
    Benchmark,
    Audit,
}

impl Mode {
    /// Modes that produce a single field.
    pub fn solves_field(self) -> bool {
        matches!(self, Mode::FixedMu | Mode::Mass | Mode::Product)
    }

    pub fn scans(self) -> bool {
        matches!(self, Mode::Scan | Mode::Legendre)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Log,
    LogPower,
    PowerPower,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MassSolver {
    #[default]
    Sphere,
    Ball,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    #[default]
    Log,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    #[default]
    Gaussian,
    Random,
    File,
}

/// `g(t) = α t log t² + β|t|^{q−1}t` (log, log_power) or
/// `−γ|t|^{r−1}t + β|t|^{q−1}t` (power_power).
#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct NonlinearitySection {
    pub family: Family,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    /// Fixed perturbation for the fixed_mu, scan, legendre and audit modes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub dim: usize,
    pub half_len: f64,
    pub n: usize,
    pub s: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    /// Shift `ω` for the mass and product modes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    #[serde(default)]
    pub solver: MassSolver,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_points: Option<usize>,
    #[serde(default)]
    pub mu_spacing: Spacing,
    /// Saved field for the audit mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub tau: f64,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub energy_stall_tol: f64,
    pub stage_grad_tol: f64,
    /// Schedule `2^0, 2^−1, …, 2^−eps_depth`, unless `eps_schedule` is given.
    pub eps_depth: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_schedule: Option<Vec<f64>>,
    pub seed: u64,
    pub init: InitKind,
    pub init_width: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub init_amplitude: Option<f64>,
    pub init_cutoff: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub init_file: Option<PathBuf>,
    pub stab_cap: f64,
    pub check_box: bool,
    /// Concurrent solves in the scan modes; 0 means available parallelism.
    pub workers: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolverConfig::default();
        SolverSection {
            tau: d.tau,
            max_iters: d.max_iters,
            grad_tol: d.grad_tol,
            energy_stall_tol: d.energy_stall_tol,
            stage_grad_tol: d.stage_grad_tol,
            eps_depth: 14,
            eps_schedule: None,
            seed: d.seed,
            init: InitKind::Gaussian,
            init_width: 1.0,
            init_amplitude: None,
            init_cutoff: 2.0,
            init_file: None,
            stab_cap: d.stab_cap,
            check_box: d.check_box,
            workers: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub directory: PathBuf,
    pub trace: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            directory: PathBuf::from("out"),
            trace: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub nonlinearity: NonlinearitySection,
    pub grid: GridSection,
    pub problem: ProblemSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub output: OutputSection,
    /// Directory that relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "config line {l}: {}", self.message),
            None => write!(f, "config: {}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

/// Reads and validates a config file. Relative paths in it are taken
/// relative to the file's directory.
pub fn parse_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
        line: None,
        message: format!("cannot read {}: {e}", path.display()),
    })?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_config_str(&text, &base)
}

pub fn parse_config_str(text: &str, base_dir: &Path) -> Result<RunConfig, ConfigError> {
    let mut cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError {
        line: e.span().map(|s| line_of_offset(text, s.start)),
        message: e.message().trim().to_string(),
    })?;
    cfg.base_dir = base_dir.to_path_buf();
    validate(&cfg, text)?;
    Ok(cfg)
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line of `key = …` inside `[section]`, or of the section header when the
/// key is absent.
fn key_line(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    let mut header = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = name.trim().to_string();
            if current == section {
                header = Some(i + 1);
            }
            continue;
        }
        if current == section {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    header
}

fn validate(cfg: &RunConfig, text: &str) -> Result<(), ConfigError> {
    let err = |section: &str, key: &str, message: String| ConfigError {
        line: key_line(text, section, key),
        message,
    };
    let g = &cfg.grid;
    if !(g.dim == 1 || g.dim == 2) {
        return Err(err("grid", "dim", format!("dim = {} must be 1 or 2", g.dim)));
    }
    if !(g.s > 0.0 && g.s <= 1.0) {
        return Err(err("grid", "s", format!("s = {} must lie in (0, 1]", g.s)));
    }
    if (g.dim as f64) < 2.0 * g.s {
        return Err(err(
            "grid",
            "s",
            format!("N must exceed 2s (N = {}, s = {})", g.dim, g.s),
        ));
    }
    if !(g.half_len > 0.0 && g.half_len.is_finite()) {
        return Err(err(
            "grid",
            "half_len",
            format!("half_len = {} must be positive", g.half_len),
        ));
    }
    if g.n < 4 || !g.n.is_power_of_two() {
        return Err(err(
            "grid",
            "n",
            format!("n = {} must be a power of two, at least 4", g.n),
        ));
    }

    let nl = &cfg.nonlinearity;
    let allowed: &[&str] = match nl.family {
        Family::Log => &[],
        Family::LogPower => &["alpha", "beta", "q"],
        Family::PowerPower => &["gamma", "beta", "r", "q"],
    };
    for (key, value) in [
        ("alpha", nl.alpha),
        ("beta", nl.beta),
        ("q", nl.q),
        ("gamma", nl.gamma),
        ("r", nl.r),
    ] {
        let wanted = allowed.contains(&key);
        if value.is_some() && !wanted {
            return Err(err(
                "nonlinearity",
                key,
                format!("key `{key}` does not apply to family {:?}", nl.family),
            ));
        }
        if value.is_none() && wanted {
            return Err(err(
                "nonlinearity",
                key,
                format!("missing key `{key}` for family {:?}", nl.family),
            ));
        }
    }
    if let Some(e) = nl.eps {
        if !(e > 0.0 && e <= 1.0) {
            return Err(err("nonlinearity", "eps", format!("eps = {e} lies outside (0, 1]")));
        }
        if matches!(cfg.problem.mode, Mode::Mass | Mode::Product) {
            return Err(err(
                "nonlinearity",
                "eps",
                "eps does not apply to the mass and product modes; set solver.eps_schedule".into(),
            ));
        }
    }
    build_spec(nl).map_err(|e| err("nonlinearity", "family", e.to_string()))?;

    let p = &cfg.problem;
    let require = |present: bool, key: &str| -> Result<(), ConfigError> {
        if present {
            Ok(())
        } else {
            Err(err(
                "problem",
                "mode",
                format!("mode {:?} requires key `{key}` in [problem]", p.mode),
            ))
        }
    };
    match p.mode {
        Mode::FixedMu => require(p.mu.is_some(), "mu")?,
        Mode::Mass | Mode::Product | Mode::Legendre => require(p.m.is_some(), "m")?,
        Mode::Audit => require(p.field.is_some(), "field")?,
        Mode::Scan | Mode::Benchmark => {}
    }
    if let Some(m) = p.m {
        if !(m > 0.0 && m.is_finite()) {
            return Err(err("problem", "m", format!("m = {m} must be positive")));
        }
    }
    if p.omega.is_some() && !matches!(p.mode, Mode::Mass | Mode::Product) {
        return Err(err(
            "problem",
            "omega",
            "omega applies only to the mass and product modes".into(),
        ));
    }
    let grid_keys = [p.mu_min.is_some(), p.mu_max.is_some(), p.mu_points.is_some()];
    if grid_keys.iter().any(|&b| b) {
        if !grid_keys.iter().all(|&b| b) {
            return Err(err(
                "problem",
                "mu_min",
                "mu_min, mu_max and mu_points go together".into(),
            ));
        }
        let (lo, hi, k) = (
            p.mu_min.unwrap_or(0.0),
            p.mu_max.unwrap_or(0.0),
            p.mu_points.unwrap_or(0),
        );
        if !(lo < hi) || k < 2 {
            return Err(err(
                "problem",
                "mu_max",
                format!("μ grid needs mu_min < mu_max and mu_points ≥ 2, got [{lo}, {hi}] with {k}"),
            ));
        }
        if p.mu_spacing == Spacing::Log && lo <= 0.0 {
            return Err(err("problem", "mu_min", "log spacing needs mu_min > 0".into()));
        }
    }
    if let Some(f) = &p.field {
        let path = cfg.resolve(f);
        if !path.exists() {
            return Err(err(
                "problem",
                "field",
                format!("field file {} does not exist", path.display()),
            ));
        }
    }

    let s = &cfg.solver;
    if let Some(sched) = &s.eps_schedule {
        if sched.is_empty() {
            return Err(err("solver", "eps_schedule", "eps_schedule is empty".into()));
        }
        for (i, &e) in sched.iter().enumerate() {
            if !(e > 0.0 && e <= 1.0) {
                return Err(err(
                    "solver",
                    "eps_schedule",
                    format!("eps_schedule[{i}] = {e} lies outside (0, 1]"),
                ));
            }
            if i > 0 && e >= sched[i - 1] {
                return Err(err(
                    "solver",
                    "eps_schedule",
                    "eps_schedule must be strictly decreasing".into(),
                ));
            }
        }
    }
    if s.eps_depth > 60 {
        return Err(err(
            "solver",
            "eps_depth",
            format!("eps_depth = {} exceeds 60", s.eps_depth),
        ));
    }
    match s.init {
        InitKind::File => {
            let f = s
                .init_file
                .as_ref()
                .ok_or_else(|| err("solver", "init", "init = \"file\" requires init_file".into()))?;
            let path = cfg.resolve(f);
            if !path.exists() {
                return Err(err(
                    "solver",
                    "init_file",
                    format!("initial field {} does not exist", path.display()),
                ));
            }
        }
        _ if s.init_file.is_some() => {
            return Err(err("solver", "init_file", "init_file needs init = \"file\"".into()));
        }
        _ => {}
    }
    cfg.solver_config().validate().map_err(|e| ConfigError {
        line: key_line(text, "solver", "tau"),
        message: e.to_string(),
    })
}

/// Builds the base nonlinearity of a section.
pub fn build_spec(nl: &NonlinearitySection) -> pohozaev_core::Result<NonlinearitySpec> {
    let v = |x: Option<f64>| x.unwrap_or(f64::NAN);
    match nl.family {
        Family::Log => Ok(NonlinearitySpec::log()),
        Family::LogPower => NonlinearitySpec::log_power(v(nl.alpha), v(nl.beta), v(nl.q)),
        Family::PowerPower => NonlinearitySpec::power_power(v(nl.gamma), v(nl.beta), v(nl.r), v(nl.q)),
    }
}

impl RunConfig {
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(&self.output.directory)
    }

    /// Base spec, perturbed when `nonlinearity.eps` is set.
    pub fn spec(&self) -> pohozaev_core::Result<NonlinearitySpec> {
        let base = build_spec(&self.nonlinearity)?;
        match self.nonlinearity.eps {
            Some(e) => base.perturb(e),
            None => Ok(base),
        }
    }

    pub fn eps_schedule(&self) -> Vec<f64> {
        match &self.solver.eps_schedule {
            Some(s) => s.clone(),
            None => (0..=self.solver.eps_depth as i32).map(|k| 0.5f64.powi(k)).collect(),
        }
    }

    pub fn solver_config(&self) -> SolverConfig {
        let s = &self.solver;
        let init = match s.init {
            InitKind::Gaussian => Init::GaussianBump {
                width: s.init_width,
                amplitude: s.init_amplitude,
            },
            InitKind::Random => Init::RandomSmooth { cutoff: s.init_cutoff },
            InitKind::File => Init::FromFile(self.resolve(s.init_file.as_deref().unwrap_or(Path::new("")))),
        };
        SolverConfig {
            tau: s.tau,
            max_iters: s.max_iters,
            grad_tol: s.grad_tol,
            energy_stall_tol: s.energy_stall_tol,
            eps_schedule: self.eps_schedule(),
            stage_grad_tol: s.stage_grad_tol,
            seed: s.seed,
            init,
            stab_cap: s.stab_cap,
            trace: self.output.trace,
            check_box: s.check_box,
        }
    }

    pub fn workers(&self) -> usize {
        if self.solver.workers > 0 {
            self.solver.workers
        } else {
            std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
        }
    }

    /// The configuration with defaults filled in, as TOML.
    pub fn resolved_toml(&self) -> String {
        let mut resolved = self.clone();
        resolved.solver.eps_schedule = Some(self.eps_schedule());
        resolved.solver.workers = self.workers();
        toml::to_string(&resolved).unwrap_or_default()
    }
}
