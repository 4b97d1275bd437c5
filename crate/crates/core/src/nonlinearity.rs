//! Nonlinearity families `g`, their primitives `G(t) = ∫_0^t g`, and the
//! transformations applied to them before solving: the ε-perturbation at the
//! origin, the linear shift `g + ωt`, and truncation to `(0, t₁)`.
//!
//! Every family returns exactly `0` at `t = 0`, even where `g(t)/t → -∞`.
//! Arguments with `|t| < 1e-300` are treated as zero.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::quadrature::{adaptive_simpson, QUAD_ABS_TOL};

/// Arguments below this magnitude evaluate as the origin.
pub const ZERO_CLAMP: f64 = 1e-300;

pub type ScalarMap = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum Family {
    /// `g(t) = α t log t² + β |t|^{q-1} t`
    LogPlusPower { alpha: f64, beta: f64, q: f64 },
    /// `g(t) = -γ |t|^{r-1} t + β |t|^{q-1} t`
    PowerPower { gamma: f64, beta: f64, r: f64, q: f64 },
    /// `h(t) = g(t) + ω t`
    Shifted { base: Box<NonlinearitySpec>, omega: f64 },
    /// `g_ε = g₊ − φ_ε g₋`
    Perturbed {
        base: Box<NonlinearitySpec>,
        eps: f64,
        table: Arc<PerturbationTable>,
    },
    /// `ḡ(t) = g(t)` on `(0, t₁)`, zero elsewhere.
    Truncated { base: Box<NonlinearitySpec>, t1: f64 },
    Custom {
        name: String,
        g: ScalarMap,
        primitive: Option<ScalarMap>,
    },
}

/// An immutable nonlinearity; cheap to clone and safe to share across threads.
#[derive(Clone)]
pub struct NonlinearitySpec {
    family: Family,
}

impl fmt::Debug for NonlinearitySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.describe())
    }
}

fn signed_pow(t: f64, p: f64) -> f64 {
    t.signum() * t.abs().powf(p)
}

impl NonlinearitySpec {
    /// The pure logarithmic nonlinearity `t log t²`.
    pub fn log() -> Self {
        NonlinearitySpec {
            family: Family::LogPlusPower {
                alpha: 1.0,
                beta: 0.0,
                q: 1.0,
            },
        }
    }

    pub fn log_power(alpha: f64, beta: f64, q: f64) -> Result<Self> {
        if !(alpha.is_finite() && beta.is_finite() && q.is_finite()) {
            return Err(Error::domain("log-power parameters must be finite"));
        }
        if q <= 0.0 {
            return Err(Error::domain(format!("log-power exponent q = {q} must be positive")));
        }
        Ok(NonlinearitySpec {
            family: Family::LogPlusPower { alpha, beta, q },
        })
    }

    pub fn power_power(gamma: f64, beta: f64, r: f64, q: f64) -> Result<Self> {
        if !(gamma > 0.0 && beta > 0.0) {
            return Err(Error::domain("power-power coefficients γ, β must be positive"));
        }
        if !(r > 0.0 && r <= 1.0) {
            return Err(Error::domain(format!(
                "power-power exponent r = {r} must lie in (0, 1]"
            )));
        }
        if !(q > r && q.is_finite()) {
            return Err(Error::domain(format!(
                "power-power exponent q = {q} must exceed r = {r}"
            )));
        }
        Ok(NonlinearitySpec {
            family: Family::PowerPower { gamma, beta, r, q },
        })
    }

    /// A user-supplied nonlinearity. Without `primitive`, `G` is computed by
    /// adaptive quadrature on every call.
    pub fn custom(
        name: impl Into<String>,
        g: impl Fn(f64) -> f64 + Send + Sync + 'static,
        primitive: Option<ScalarMap>,
    ) -> Self {
        NonlinearitySpec {
            family: Family::Custom {
                name: name.into(),
                g: Arc::new(g),
                primitive,
            },
        }
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    /// Replaces `g₋` by `φ_ε g₋`, removing any sublinear singularity at the origin.
    pub fn perturb(&self, eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(Error::domain(format!("perturbation ε = {eps} must lie in (0, 1]")));
        }
        let table = PerturbationTable::build(self, eps)?;
        Ok(NonlinearitySpec {
            family: Family::Perturbed {
                base: Box::new(self.clone()),
                eps,
                table: Arc::new(table),
            },
        })
    }

    /// `h_ω(t) = g(t) + ωt`.
    pub fn shift(&self, omega: f64) -> Result<Self> {
        if !(omega >= 0.0 && omega.is_finite()) {
            return Err(Error::domain(format!(
                "shift ω = {omega} must be finite and nonnegative"
            )));
        }
        if omega == 0.0 {
            return Ok(self.clone());
        }
        Ok(NonlinearitySpec {
            family: Family::Shifted {
                base: Box::new(self.clone()),
                omega,
            },
        })
    }

    /// Restricts `g` to `(0, t₁)`; `t₁ = +∞` keeps the whole positive half-line.
    pub fn truncate(&self, t1: f64) -> Result<Self> {
        if !(t1 > 0.0) {
            return Err(Error::domain(format!("truncation level t₁ = {t1} must be positive")));
        }
        Ok(NonlinearitySpec {
            family: Family::Truncated {
                base: Box::new(self.clone()),
                t1,
            },
        })
    }

    /// The innermost spec with every perturbation layer removed.
    pub fn unperturbed(&self) -> NonlinearitySpec {
        match &self.family {
            Family::Perturbed { base, .. } => base.unperturbed(),
            Family::Shifted { base, omega } => NonlinearitySpec {
                family: Family::Shifted {
                    base: Box::new(base.unperturbed()),
                    omega: *omega,
                },
            },
            Family::Truncated { base, t1 } => NonlinearitySpec {
                family: Family::Truncated {
                    base: Box::new(base.unperturbed()),
                    t1: *t1,
                },
            },
            _ => self.clone(),
        }
    }

    /// The outermost perturbation parameter, if any.
    pub fn epsilon(&self) -> Option<f64> {
        match &self.family {
            Family::Perturbed { eps, .. } => Some(*eps),
            _ => None,
        }
    }

    /// `α` when the nonlinearity is exactly `g(t) = α t log t²`, so that
    /// `g(ct) = c g(t) + α c t log c²`.
    pub fn pure_log_coefficient(&self) -> Option<f64> {
        match &self.family {
            Family::LogPlusPower { alpha, beta, .. } if *beta == 0.0 && *alpha != 0.0 => Some(*alpha),
            _ => None,
        }
    }

    /// Whether `g` is odd by construction.
    pub fn is_odd(&self) -> bool {
        match &self.family {
            Family::LogPlusPower { .. } | Family::PowerPower { .. } => true,
            Family::Shifted { base, .. } | Family::Perturbed { base, .. } => base.is_odd(),
            Family::Truncated { .. } | Family::Custom { .. } => false,
        }
    }

    pub fn describe(&self) -> String {
        match &self.family {
            Family::LogPlusPower { alpha, beta, q } => {
                format!("log_power(alpha={alpha}, beta={beta}, q={q})")
            }
            Family::PowerPower { gamma, beta, r, q } => {
                format!("power_power(gamma={gamma}, beta={beta}, r={r}, q={q})")
            }
            Family::Shifted { base, omega } => format!("shift({}, omega={omega})", base.describe()),
            Family::Perturbed { base, eps, .. } => {
                format!("perturb({}, eps={eps})", base.describe())
            }
            Family::Truncated { base, t1 } => format!("truncate({}, t1={t1})", base.describe()),
            Family::Custom { name, .. } => format!("custom({name})"),
        }
    }

    /// `g(t)` on the hot path; non-finite input propagates.
    pub fn g(&self, t: f64) -> f64 {
        if t.abs() < ZERO_CLAMP {
            return 0.0;
        }
        match &self.family {
            Family::LogPlusPower { alpha, beta, q } => {
                let mut v = 0.0;
                if *alpha != 0.0 {
                    v += alpha * t * 2.0 * t.abs().ln();
                }
                if *beta != 0.0 {
                    v += beta * signed_pow(t, *q);
                }
                v
            }
            Family::PowerPower { gamma, beta, r, q } => -gamma * signed_pow(t, *r) + beta * signed_pow(t, *q),
            Family::Shifted { base, omega } => base.g(t) + omega * t,
            Family::Perturbed { base, eps, .. } => {
                let phi = phi_eps(*eps, t);
                if phi >= 1.0 {
                    base.g(t)
                } else {
                    base.g(t) + (1.0 - phi) * base.g_minus(t)
                }
            }
            Family::Truncated { base, t1 } => {
                if t > 0.0 && t < *t1 {
                    base.g(t)
                } else {
                    0.0
                }
            }
            Family::Custom { g, .. } => g(t),
        }
    }

    /// `G(t)` on the hot path. Quadrature failures surface as NaN; use
    /// [`eval_primitive`](Self::eval_primitive) for a checked value.
    pub fn primitive(&self, t: f64) -> f64 {
        self.eval_primitive_inner(t).unwrap_or(f64::NAN)
    }

    pub fn eval_g(&self, t: f64) -> Result<f64> {
        if !t.is_finite() {
            return Err(Error::domain(format!("g evaluated at non-finite argument {t}")));
        }
        Ok(self.g(t))
    }

    pub fn eval_primitive(&self, t: f64) -> Result<f64> {
        if !t.is_finite() {
            return Err(Error::domain(format!("G evaluated at non-finite argument {t}")));
        }
        self.eval_primitive_inner(t)
    }

    fn eval_primitive_inner(&self, t: f64) -> Result<f64> {
        if t.abs() < ZERO_CLAMP {
            return Ok(0.0);
        }
        Ok(match &self.family {
            Family::LogPlusPower { alpha, beta, q } => {
                let t2 = t * t;
                let mut v = 0.0;
                if *alpha != 0.0 {
                    v += alpha * 0.5 * t2 * (2.0 * t.abs().ln() - 1.0);
                }
                if *beta != 0.0 {
                    v += beta * t.abs().powf(q + 1.0) / (q + 1.0);
                }
                v
            }
            Family::PowerPower { gamma, beta, r, q } => {
                let a = t.abs();
                -gamma * a.powf(r + 1.0) / (r + 1.0) + beta * a.powf(q + 1.0) / (q + 1.0)
            }
            Family::Shifted { base, omega } => base.eval_primitive_inner(t)? + 0.5 * omega * t * t,
            Family::Perturbed { base, table, .. } => base.eval_primitive_inner(t)? + table.eval(t),
            Family::Truncated { base, t1 } => {
                if t <= 0.0 {
                    0.0
                } else if t < *t1 {
                    base.eval_primitive_inner(t)?
                } else {
                    base.eval_primitive_inner(*t1)?
                }
            }
            Family::Custom { g, primitive, .. } => match primitive {
                Some(p) => p(t),
                None => {
                    let g = g.clone();
                    adaptive_simpson(
                        &move |x: f64| if x.abs() < ZERO_CLAMP { 0.0 } else { g(x) },
                        0.0,
                        t,
                        QUAD_ABS_TOL,
                    )?
                }
            },
        })
    }

    /// The part `g₊` with `g₊(t)t = (g(t)t)⁺`.
    pub fn g_plus(&self, t: f64) -> f64 {
        let v = self.g(t);
        if t >= 0.0 {
            v.max(0.0)
        } else {
            v.min(0.0)
        }
    }

    /// The part `g₋` with `g₋(t)t = (g(t)t)⁻`.
    pub fn g_minus(&self, t: f64) -> f64 {
        let v = self.g(t);
        if t >= 0.0 {
            (-v).max(0.0)
        } else {
            -(v.max(0.0))
        }
    }

    /// Central finite-difference estimate of `g'(t)`.
    pub fn dg(&self, t: f64) -> f64 {
        let h = 1e-6 * t.abs().max(1e-6);
        (self.g(t + h) - self.g(t - h)) / (2.0 * h)
    }

    pub fn sign_split(&self) -> SignSplit {
        SignSplit { spec: self.clone() }
    }

    /// Smallest `|t|` above which `G` is first positive, found by a log-spaced scan.
    /// Returns `None` when `G ≤ 0` on the whole scan.
    pub fn positive_primitive_point(&self, t_min: f64, t_max: f64, n: usize) -> Option<f64> {
        log_space(t_min, t_max, n).find(|&t| self.primitive(t) > 0.0 || self.primitive(-t) > 0.0)
    }
}

/// `φ_ε(t) = |t|/ε` for `|t| < ε`, one otherwise.
pub fn phi_eps(eps: f64, t: f64) -> f64 {
    let a = t.abs();
    if a < eps {
        a / eps
    } else {
        1.0
    }
}

pub(crate) fn log_space(t_min: f64, t_max: f64, n: usize) -> impl Iterator<Item = f64> {
    let (a, b) = (t_min.ln(), t_max.ln());
    let denom = (n.max(2) - 1) as f64;
    (0..n).map(move |i| {
        if n == 1 {
            t_min
        } else {
            (a + (b - a) * i as f64 / denom).exp()
        }
    })
}

/// Tabulated `D_ε(t) = ∫_0^t (1 − φ_ε) g₋` on `[-ε, ε]`, so that `G_ε = G + D_ε`.
///
/// Nodes are cubically graded toward the origin, values come from adaptive
/// Simpson between consecutive nodes, and evaluation is cubic Hermite with the
/// exact integrand as slope.
pub struct PerturbationTable {
    eps: f64,
    pos: Vec<(f64, f64)>,
    neg: Vec<(f64, f64)>,
}

const TABLE_CELLS: usize = 2048;

impl PerturbationTable {
    fn build(base: &NonlinearitySpec, eps: f64) -> Result<Self> {
        let side = |sign: f64| -> Result<Vec<(f64, f64)>> {
            let integrand = |tau: f64| (1.0 - phi_eps(eps, tau)) * base.g_minus(tau);
            let mut out = Vec::with_capacity(TABLE_CELLS + 1);
            let mut acc = 0.0;
            let mut prev = 0.0;
            out.push((0.0, integrand(0.0)));
            for i in 1..=TABLE_CELLS {
                let t = sign * eps * (i as f64 / TABLE_CELLS as f64).powi(3);
                acc += adaptive_simpson(&integrand, prev, t, 1e-3 * QUAD_ABS_TOL / TABLE_CELLS as f64)
                    .or_else(|_| adaptive_simpson(&integrand, prev, t, QUAD_ABS_TOL / TABLE_CELLS as f64))?;
                out.push((acc, integrand(t)));
                prev = t;
            }
            Ok(out)
        };
        Ok(PerturbationTable {
            eps,
            pos: side(1.0)?,
            neg: side(-1.0)?,
        })
    }

    pub fn eval(&self, t: f64) -> f64 {
        let a = t.abs();
        let (tab, sign) = if t >= 0.0 { (&self.pos, 1.0) } else { (&self.neg, -1.0) };
        if a >= self.eps {
            return tab[TABLE_CELLS].0;
        }
        let k = TABLE_CELLS as f64;
        let idx = ((k * (a / self.eps).cbrt()).floor() as usize).min(TABLE_CELLS - 1);
        let node = |i: usize| sign * self.eps * (i as f64 / k).powi(3);
        let (x0, x1) = (node(idx), node(idx + 1));
        let (y0, d0) = tab[idx];
        let (y1, d1) = tab[idx + 1];
        let h = x1 - x0;
        let u = (t - x0) / h;
        let u2 = u * u;
        let u3 = u2 * u;
        (2.0 * u3 - 3.0 * u2 + 1.0) * y0
            + (u3 - 2.0 * u2 + u) * h * d0
            + (-2.0 * u3 + 3.0 * u2) * y1
            + (u3 - u2) * h * d1
    }
}

/// The decomposition `g = g₊ − g₋`, `G = G₊ − G₋` with `g±(t)t ≥ 0`.
pub struct SignSplit {
    spec: NonlinearitySpec,
}

impl SignSplit {
    pub fn g_plus(&self, t: f64) -> f64 {
        self.spec.g_plus(t)
    }

    pub fn g_minus(&self, t: f64) -> f64 {
        self.spec.g_minus(t)
    }

    pub fn primitive_plus(&self, t: f64) -> Result<f64> {
        adaptive_simpson(&|x| self.spec.g_plus(x), 0.0, t, QUAD_ABS_TOL)
    }

    pub fn primitive_minus(&self, t: f64) -> Result<f64> {
        adaptive_simpson(&|x| self.spec.g_minus(x), 0.0, t, QUAD_ABS_TOL)
    }
}

/// Scan settings for the frequency ceiling `μ̄₀ = sup 2G(t)/t²`.
#[derive(Debug, Clone, Copy)]
pub struct MuBarScan {
    pub t_min: f64,
    pub t_max: f64,
    pub n_points: usize,
    pub divergence_threshold: f64,
}

impl Default for MuBarScan {
    fn default() -> Self {
        MuBarScan {
            t_min: 1e-8,
            t_max: 1e8,
            n_points: 4000,
            divergence_threshold: 1e12,
        }
    }
}

/// `μ̄₀ = sup_{t≠0} G(t)/(t²/2)`, or `+∞`.
///
/// The ratio is sampled on a log-spaced `|t|` grid of both signs. An interior
/// maximum is refined by golden-section search. A tail that is still
/// increasing at `t_max` is classified as divergent when it exceeds the
/// threshold or when its per-decade increments do not contract; otherwise
/// the geometric tail is summed.
pub fn mu_bar0(spec: &NonlinearitySpec, scan: MuBarScan) -> Result<f64> {
    if scan.n_points == 0 || !(scan.t_min > 0.0 && scan.t_max > scan.t_min) {
        return Err(Error::domain("empty or invalid μ̄₀ scan range"));
    }
    let ratio = |t: f64| 2.0 * spec.primitive(t) / (t * t);
    let mut best = f64::NEG_INFINITY;
    for sign in [1.0, -1.0] {
        let ts: Vec<f64> = log_space(scan.t_min, scan.t_max, scan.n_points)
            .map(|t| sign * t)
            .collect();
        let vals: Vec<f64> = ts.iter().map(|&t| ratio(t)).collect();
        let (imax, &vmax) = vals
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_finite())
            .max_by(|a, b| a.1.total_cmp(b.1))
            .ok_or_else(|| Error::domain("μ̄₀ ratio is non-finite on the whole scan"))?;
        best = best.max(vmax);

        let t_end = sign * scan.t_max;
        let r0 = ratio(t_end);
        let r1 = ratio(t_end / 10.0);
        let r2 = ratio(t_end / 100.0);
        let (d0, d1) = (r0 - r1, r1 - r2);
        if d0 > 0.0 {
            if r0 > scan.divergence_threshold {
                return Ok(f64::INFINITY);
            }
            if d1 > 0.0 {
                let rho = d0 / d1;
                if rho >= 0.95 {
                    return Ok(f64::INFINITY);
                }
                best = best.max(r0 + d0 * rho / (1.0 - rho));
            }
        }

        if imax > 0 && imax + 1 < ts.len() {
            let (lo, hi) = (ts[imax - 1].abs().ln(), ts[imax + 1].abs().ln());
            let refined = golden_max(|x| ratio(sign * x.exp()), lo, hi, 1e-12);
            best = best.max(refined);
        }
    }
    Ok(best)
}

pub(crate) fn golden_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() < tol {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    fc.max(fd)
}

/// `(p̄, 2*_s) = (1 + 4s/N, 2N/(N − 2s))`; `2*_s = +∞` in the limiting case `N = 2s`.
pub fn critical_exponents(dim: usize, s: f64) -> Result<(f64, f64)> {
    check_exponents(dim, s)?;
    let n = dim as f64;
    let p_bar = 1.0 + 4.0 * s / n;
    let denom = n - 2.0 * s;
    let two_star = if denom == 0.0 { f64::INFINITY } else { 2.0 * n / denom };
    Ok((p_bar, two_star))
}

/// `1/2*_s = (N − 2s)/(2N)`, finite (possibly zero) for every admissible pair.
pub fn inverse_two_star(dim: usize, s: f64) -> Result<f64> {
    check_exponents(dim, s)?;
    let n = dim as f64;
    Ok((n - 2.0 * s) / (2.0 * n))
}

fn check_exponents(dim: usize, s: f64) -> Result<()> {
    if !(s > 0.0 && s <= 1.0) {
        return Err(Error::domain(format!("fractional order s = {s} must lie in (0, 1]")));
    }
    if (dim as f64) < 2.0 * s {
        return Err(Error::domain(format!("N must exceed 2s (N = {dim}, s = {s})")));
    }
    Ok(())
}
