//! Minimization drivers.
//!
//! * [`solve_mass_constrained`]: semi-implicit normalized gradient flow on the
//!   L² sphere `∫u² = m` or the ball `∫u² ≤ m`.
//! * [`solve_fixed_mu`]: the least action `a(μ)` on the Pohožaev set at fixed
//!   frequency, via minimization of the Dirichlet energy on that set.
//! * [`solve_product`]: Pohožaev minimization of `I^m` over pairs `(μ, u)`.
//! * [`epsilon_continuation`] and [`shift_and_solve`]: drivers that warm-start
//!   the above along `ε → 0` and undo the linear shift `g + ωt`.

mod continuation;
mod fixed_mu;
mod flow;
mod product;

pub use continuation::{epsilon_continuation, shift_and_solve, StageSolver, StageSummary};
pub use fixed_mu::{solve_fixed_mu, FixedMuSolution};
pub use flow::solve_mass_constrained;
pub use product::solve_product;

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::field::{read_field, read_field_csv, Field, Grid};
use crate::functionals::{IdentityReport, Model};
use crate::nonlinearity::{log_space, NonlinearitySpec};

/// Outer-shell amplitude ratio above which a result is rejected.
pub const BOX_ERROR_RATIO: f64 = 1e-3;
/// Outer-shell amplitude ratio above which a warning is attached.
pub const BOX_WARN_RATIO: f64 = 1e-6;

const STALL_WINDOW: usize = 20;
const DIVERGENCE_WINDOW: usize = 50;
const MAX_HALVINGS: usize = 20;

/// Initial profile.
#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    /// `a·exp(−|x|²/(2w²))`. Without an amplitude, one is chosen where `G > 0`.
    GaussianBump { width: f64, amplitude: Option<f64> },
    /// Random Fourier modes with `|k| ≤ cutoff` modulating a broad Gaussian envelope.
    RandomSmooth { cutoff: f64 },
    /// A saved field (binary, or CSV when the extension is `.csv`).
    FromFile(PathBuf),
    /// An in-memory field, used for warm starts.
    Field(Field),
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Pseudo-time step of the semi-implicit flow; the initial step of the line searches.
    pub tau: f64,
    pub max_iters: usize,
    /// Tolerance on the relative projected-gradient norm.
    pub grad_tol: f64,
    /// Relative energy change over 20 steps below which the run counts as stalled.
    pub energy_stall_tol: f64,
    /// Strictly decreasing ε values in `(0, 1]` for the continuation drivers.
    pub eps_schedule: Vec<f64>,
    /// Gradient tolerance of every continuation stage but the last.
    pub stage_grad_tol: f64,
    pub seed: u64,
    pub init: Init,
    /// Upper bound on the stabilizing shift `c_stab` of the flow.
    pub stab_cap: f64,
    /// Record one [`TraceRow`] per iteration.
    pub trace: bool,
    /// Check decay toward the box edge. Turn off only for problems whose
    /// minimizer is genuinely periodic, such as a constant mode.
    pub check_box: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tau: 0.5,
            max_iters: 20_000,
            grad_tol: 1e-7,
            energy_stall_tol: 1e-14,
            eps_schedule: (0..=14).map(|k| 0.5f64.powi(k)).collect(),
            stage_grad_tol: 1e-5,
            seed: 0,
            init: Init::GaussianBump {
                width: 1.0,
                amplitude: None,
            },
            stab_cap: 1e3,
            trace: false,
            check_box: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::domain(format!("tau = {} must be positive", self.tau)));
        }
        if !(self.grad_tol > 0.0 && self.energy_stall_tol > 0.0 && self.stage_grad_tol > 0.0) {
            return Err(Error::domain("solver tolerances must be positive"));
        }
        if !(self.stab_cap >= 0.0) {
            return Err(Error::domain("stab_cap must be nonnegative"));
        }
        if self.max_iters == 0 {
            return Err(Error::domain("max_iters must be positive"));
        }
        for (i, &e) in self.eps_schedule.iter().enumerate() {
            if !(e > 0.0 && e <= 1.0) {
                return Err(Error::domain(format!("eps_schedule[{i}] = {e} lies outside (0, 1]")));
            }
            if i > 0 && e >= self.eps_schedule[i - 1] {
                return Err(Error::domain("eps_schedule must be strictly decreasing"));
            }
        }
        Ok(())
    }
}

/// One iteration of a solver trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub energy: f64,
    pub mass: f64,
    pub mu: f64,
    pub grad_norm: f64,
}

impl TraceRow {
    pub const CSV_HEADER: &'static str = "iteration,energy,mass,mu,grad_norm";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.iteration, self.energy, self.mass, self.mu, self.grad_norm
        )
    }
}

/// A computed pair `(μ, u)` with its audit.
#[derive(Debug, Clone)]
pub struct SolutionRecord {
    pub mu: f64,
    pub u: Field,
    /// Target mass.
    pub m: f64,
    /// `K(u)` under the nonlinearity the record is audited against.
    pub energy: f64,
    /// `I^m(μ, u)` under the same spec.
    pub lagrangian: f64,
    pub a_value: Option<f64>,
    /// Residuals recomputed from `(μ, u)` after the solve.
    pub report: IdentityReport,
    /// The flow's own multiplier estimate `(∫g(u)u − A)/|u|₂²`.
    pub mu_flow: f64,
    pub iterations: usize,
    /// ε of the last stage, zero when no perturbation was applied.
    pub eps_final: f64,
    pub converged: bool,
    /// Per-stage summaries of a continuation run.
    pub stages: Vec<StageSummary>,
    /// `K_ω(u) + (ω/2)|u|₂²` for shift-and-solve records.
    pub energy_via_shift: Option<f64>,
    pub warnings: Vec<String>,
    pub trace: Vec<TraceRow>,
}

impl SolutionRecord {
    /// Builds the record by auditing `(μ, u)` under `model`.
    pub(crate) fn audit(model: &Model, mu: f64, u: Field, m: f64, run: RunInfo) -> Result<Self> {
        let report = model.identity_audit(mu, &u, m)?;
        let snap = model.snapshot(&u)?;
        let mu_flow = model.mu_from_nehari(&snap)?;
        Ok(SolutionRecord {
            mu,
            m,
            energy: report.energy,
            lagrangian: report.lagrangian,
            a_value: None,
            report,
            mu_flow,
            iterations: run.iterations,
            eps_final: model.spec().epsilon().unwrap_or(0.0),
            converged: run.converged,
            stages: Vec::new(),
            energy_via_shift: None,
            warnings: run.warnings,
            trace: run.trace,
            u,
        })
    }

    /// Relative disagreement between the Pohožaev and flow multipliers.
    pub fn multiplier_gap(&self) -> f64 {
        (self.mu - self.mu_flow).abs() / self.mu.abs().max(self.mu_flow.abs()).max(1e-300)
    }
}

#[derive(Debug, Default)]
pub(crate) struct RunInfo {
    pub iterations: usize,
    pub converged: bool,
    pub warnings: Vec<String>,
    pub trace: Vec<TraceRow>,
}

/// Builds the starting field.
pub fn initial_field(spec: &NonlinearitySpec, grid: Grid, init: &Init, seed: u64) -> Result<Field> {
    let u = match init {
        Init::GaussianBump { width, amplitude } => {
            if !(*width > 0.0) {
                return Err(Error::domain(format!("bump width {width} must be positive")));
            }
            let amp = match amplitude {
                Some(a) => *a,
                None => default_amplitude(spec),
            };
            Field::from_fn(grid, |[x, y]| amp * (-(x * x + y * y) / (2.0 * width * width)).exp())
        }
        Init::RandomSmooth { cutoff } => random_smooth(grid, *cutoff, seed)?,
        Init::FromFile(path) => {
            let file = std::fs::File::open(path)?;
            let u = if path.extension().is_some_and(|e| e == "csv") {
                read_field_csv(file)?
            } else {
                read_field(std::io::BufReader::new(file))?
            };
            if *u.grid() != grid {
                return Err(Error::domain(format!(
                    "field in {} has grid {:?}, expected {:?}",
                    path.display(),
                    u.grid(),
                    grid
                )));
            }
            u
        }
        Init::Field(u) => {
            if *u.grid() != grid {
                return Err(Error::domain("warm-start field lives on a different grid"));
            }
            u.clone()
        }
    };
    if u.max_abs() == 0.0 {
        return Err(Error::degenerate("zero initial field is a fixed point of every solver"));
    }
    Ok(u)
}

/// Twice the first `t` with `G(t) > 0`, or 1 when `G` is positive from the
/// start of the scan or nowhere on it.
fn default_amplitude(spec: &NonlinearitySpec) -> f64 {
    const T_MIN: f64 = 1e-6;
    match spec.positive_primitive_point(T_MIN, 1e6, 600) {
        Some(t) if t > T_MIN => 2.0 * t,
        _ => 1.0,
    }
}

fn random_smooth(grid: Grid, cutoff: f64, seed: u64) -> Result<Field> {
    if !(cutoff > 0.0) {
        return Err(Error::domain(format!("random mode cutoff {cutoff} must be positive")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dk = std::f64::consts::PI / grid.half_len();
    let jmax = (cutoff / dk).floor() as i64;
    let second = if grid.dim() == 2 { jmax } else { 0 };
    let mut modes = Vec::new();
    for j1 in -jmax..=jmax {
        for j2 in -second..=second {
            let (k1, k2) = (dk * j1 as f64, dk * j2 as f64);
            if k1.hypot(k2) <= cutoff {
                modes.push((
                    k1,
                    k2,
                    rng.random_range(-1.0..1.0),
                    rng.random_range(0.0..std::f64::consts::TAU),
                ));
            }
        }
    }
    let noise = Field::from_fn(grid, |[x, y]| {
        modes
            .iter()
            .map(|&(k1, k2, a, p)| a * (k1 * x + k2 * y + p).cos())
            .sum()
    });
    let scale = noise.max_abs();
    let w = grid.half_len() / 4.0;
    let values = noise
        .values()
        .iter()
        .enumerate()
        .map(|(idx, &r)| {
            let [x, y] = grid.point(idx);
            let env = (-(x * x + y * y) / (2.0 * w * w)).exp();
            env * (1.0 + 0.5 * r / scale.max(1e-300))
        })
        .collect();
    Field::new(grid, values)
}

/// Everything a descent step needs at one iterate.
pub(crate) struct State {
    pub dirichlet: f64,
    pub lu: Vec<f64>,
    pub gu: Vec<f64>,
    pub int_primitive: f64,
    pub int_gu: f64,
    pub mass: f64,
}

impl State {
    pub fn new(model: &Model, u: &Field) -> Result<State> {
        let (dirichlet, lu) = model.op().dirichlet_and_apply(u);
        let spec = model.spec();
        let w = model.grid().cell_volume();
        let mut gu = Vec::with_capacity(u.values().len());
        let (mut ig, mut igu, mut mass) = (0.0, 0.0, 0.0);
        for &v in u.values() {
            let g = spec.g(v);
            ig += spec.primitive(v);
            igu += g * v;
            mass += v * v;
            gu.push(g);
        }
        let st = State {
            dirichlet,
            lu: lu.into_values(),
            gu,
            int_primitive: w * ig,
            int_gu: w * igu,
            mass: w * mass,
        };
        if !(st.int_primitive.is_finite() && st.int_gu.is_finite() && st.dirichlet.is_finite()) {
            return Err(Error::Numeric {
                what: "non-finite energy along the iteration".into(),
                achieved: f64::NAN,
            });
        }
        Ok(st)
    }

    pub fn energy(&self) -> f64 {
        0.5 * self.dirichlet - self.int_primitive
    }

    /// `(∫g(u)u − A)/|u|₂²`.
    pub fn mu_nehari(&self) -> f64 {
        (self.int_gu - self.dirichlet) / self.mass
    }

    /// Relative residual `‖Lu + μu − g(u)‖ / (‖Lu‖ + |μ|‖u‖ + ‖g(u)‖)`.
    pub fn residual(&self, u: &Field, mu: f64) -> f64 {
        let (mut r2, mut l2, mut g2) = (0.0, 0.0, 0.0);
        for ((&v, &l), &g) in u.values().iter().zip(&self.lu).zip(&self.gu) {
            let r = l + mu * v - g;
            r2 += r * r;
            l2 += l * l;
            g2 += g * g;
        }
        let w = u.grid().cell_volume();
        let norm = (w * l2).sqrt() + mu.abs() * self.mass.sqrt() + (w * g2).sqrt();
        if norm == 0.0 {
            0.0
        } else {
            (w * r2).sqrt() / norm
        }
    }
}

/// `max(0, −min g′)` over the range of `|u|` present in the iterate, both signs, capped.
pub(crate) fn stabilizer(spec: &NonlinearitySpec, u: &Field, cap: f64) -> f64 {
    let hi = u.max_abs();
    let lo = u
        .values()
        .iter()
        .map(|v| v.abs())
        .filter(|&a| a > 0.0)
        .fold(hi, f64::min)
        .max(1e-300)
        .min(hi);
    let mut min_slope = f64::INFINITY;
    let samples: Vec<f64> = if hi > lo {
        log_space(lo, hi, 96).collect()
    } else {
        vec![hi]
    };
    for t in samples {
        min_slope = min_slope.min(spec.dg(t)).min(spec.dg(-t));
    }
    (-min_slope).clamp(0.0, cap)
}

/// Attaches a warning, or fails, when the iterate does not decay toward the box edge.
pub(crate) fn check_box(u: &Field, warnings: &mut Vec<String>) -> Result<()> {
    let ratio = u.outer_shell_ratio();
    if ratio > BOX_ERROR_RATIO {
        return Err(Error::BoxTooSmall {
            ratio,
            limit: BOX_ERROR_RATIO,
        });
    }
    if ratio > BOX_WARN_RATIO {
        warnings.push(format!("box too small: outer-shell amplitude ratio {ratio:.3e}"));
    }
    Ok(())
}

/// `(σ + (−Δ)^s)^{-1} v`.
pub(crate) fn precondition(model: &Model, v: &[f64], sigma: f64) -> Vec<f64> {
    let f = Field::from_vec_unchecked(*model.grid(), v.to_vec());
    model.op().solve_shifted(&f, sigma, 1.0).into_values()
}

pub(crate) fn dot(grid: &Grid, a: &[f64], b: &[f64]) -> f64 {
    grid.cell_volume() * a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>()
}

/// Sliding-window stall detector on a scalar objective.
pub(crate) struct StallWatch {
    history: std::collections::VecDeque<f64>,
    tol: f64,
}

impl StallWatch {
    pub fn new(tol: f64) -> Self {
        StallWatch {
            history: std::collections::VecDeque::with_capacity(STALL_WINDOW + 1),
            tol,
        }
    }

    /// Records a value; true once the change over the window is below tolerance.
    pub fn push(&mut self, v: f64) -> bool {
        self.history.push_back(v);
        if self.history.len() > STALL_WINDOW {
            self.history.pop_front();
            let first = self.history[0];
            return (first - v).abs() <= self.tol * v.abs().max(1.0);
        }
        false
    }
}
