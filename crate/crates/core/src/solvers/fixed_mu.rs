use super::{check_box, dot, initial_field, precondition, SolverConfig, StallWatch, State, TraceRow};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::functionals::Model;
use crate::nonlinearity::{mu_bar0, MuBarScan};

const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 40;
const CONSTRAINT_TOL: f64 = 1e-8;

/// Result of a fixed-frequency solve.
#[derive(Debug, Clone)]
pub struct FixedMuSolution {
    pub mu: f64,
    /// `a(μ) = (s/N)A` at the dilated point on the Pohožaev set.
    pub a: f64,
    pub u: Field,
    pub iterations: usize,
    pub converged: bool,
    /// `|P_μ/2*_s|` normalized by `A/2*_s + |ω|`, after the virtual dilation.
    pub constraint_residual: f64,
    pub pde_residual: f64,
    /// `μ ≤ 0`: existence of a minimizer is not guaranteed there.
    pub outside_guarantee: bool,
    pub warnings: Vec<String>,
    pub trace: Vec<TraceRow>,
}

/// Computes `a(μ) = inf J_μ` over the Pohožaev set `{A/2*_s = ∫(G(u) − μu²/2)}`.
///
/// On that set `J_μ = (s/N)A`, so the solver minimizes `A` along the set with
/// preconditioned projected gradient steps. Each trial point is pulled back by
/// the amplitude scaling `u ↦ cu` that restores the constraint, choosing the
/// root nearest `c = 1`, and accepted under an Armijo condition. On exit the
/// Pohožaev dilation is applied to the coefficients and `a = (s/N)A` is
/// reported there.
///
/// When `N = 2s` both `A` and the constraint are invariant under `u ↦ u(·/t)`,
/// and on the torus an iterate can slide along that orbit toward a flat field.
/// The orbit is then pinned by holding the mass at that of the retracted
/// initial field (steps are projected off the mass gradient and each trial is
/// dilated back), and the minimizer is finally dilated so that it solves the
/// equation itself rather than a multiple of it.
pub fn solve_fixed_mu(model: &Model, mu: f64, config: &SolverConfig) -> Result<FixedMuSolution> {
    config.validate()?;
    if !mu.is_finite() {
        return Err(Error::domain(format!("frequency μ = {mu} must be finite")));
    }
    let spec = model.spec();
    let ceiling = mu_bar0(spec, MuBarScan::default())?;
    if mu >= ceiling {
        return Err(Error::domain(format!(
            "μ = {mu} ≥ μ̄₀ = {ceiling}: no function satisfies the Pohožaev identity at this frequency"
        )));
    }
    let grid = *model.grid();
    let theta = model.theta();
    let sigma = mu.abs().max(1.0);

    let start = initial_field(spec, grid, &config.init, config.seed)?;
    let mut u = retract(model, mu, &start)?.ok_or_else(|| {
        Error::Unreachable(format!(
            "no amplitude of the initial profile satisfies ∫(G(u) − μu²/2) = A/2*_s at μ = {mu}"
        ))
    })?;

    let scale_free = theta.abs() < 1e-14;
    let m_ref = u.mass();

    let mut stall = StallWatch::new(config.energy_stall_tol);
    let mut alpha = config.tau;
    let mut converged = false;
    let mut iterations = 0;
    let mut trace = Vec::new();

    for iter in 1..=config.max_iters {
        iterations = iter;
        let st = State::new(model, &u)?;
        let grad_a: Vec<f64> = st.lu.iter().map(|l| 2.0 * l).collect();
        let grad_c: Vec<f64> = u
            .values()
            .iter()
            .zip(&st.gu)
            .zip(&st.lu)
            .map(|((&v, &g), &l)| g - mu * v - 2.0 * theta * l)
            .collect();
        let pa = precondition(model, &grad_a, sigma);
        let mut normals = vec![grad_c];
        if scale_free {
            normals.push(u.values().iter().map(|v| 2.0 * v).collect());
        }
        let dir = project_off(&grid, &pa, &normals, |g| precondition(model, g, sigma));
        let slope = -dot(&grid, &grad_a, &dir);
        let scale = dot(&grid, &grad_a, &pa);
        let rel = if scale > 0.0 {
            (slope.max(0.0) / scale).sqrt()
        } else {
            0.0
        };
        if config.trace {
            trace.push(TraceRow {
                iteration: iter,
                energy: model.order() / model.dim() as f64 * st.dirichlet,
                mass: st.mass,
                mu,
                grad_norm: rel,
            });
        }
        if rel < config.grad_tol || stall.push(st.dirichlet) {
            converged = true;
            break;
        }

        let mut moved = false;
        for _ in 0..MAX_BACKTRACKS {
            let trial =
                Field::from_vec_unchecked(grid, u.values().iter().zip(&dir).map(|(v, d)| v + alpha * d).collect());
            let next = match retract(model, mu, &trial)? {
                Some(v) if scale_free => regauge(model, mu, &v, m_ref)?,
                other => other,
            };
            if let Some(next) = next {
                let a_next = model.op().dirichlet(&next);
                if a_next <= st.dirichlet - ARMIJO * alpha * slope {
                    u = next;
                    moved = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !moved {
            // No admissible decrease along the projected direction: at a
            // minimizer up to round-off.
            converged = rel < config.grad_tol.sqrt();
            break;
        }
        alpha *= 2.0;
    }

    if scale_free {
        // The minimizer solves (−Δ)^s u = κ(g(u) − μu); u(·/κ^{1/2s}) solves it with κ = 1.
        let st = State::new(model, &u)?;
        let kappa = st.dirichlet / (st.int_gu - mu * st.mass);
        if kappa > 0.0 && kappa.is_finite() {
            let dilated = model.op().dilate(&u, kappa.powf(0.5 / model.order()))?;
            u = retract(model, mu, &dilated)?
                .ok_or_else(|| Error::Unreachable(format!("dilated minimizer left the Pohožaev set at μ = {mu}")))?;
        }
    }
    let mut warnings = Vec::new();
    if config.check_box {
        check_box(&u, &mut warnings)?;
    }
    let snap = model.snapshot(&u)?;
    let coeffs = model.coeffs_from(&snap, mu);
    let at = if theta > 0.0 {
        coeffs.dilate(coeffs.pohozaev_dilation()?)
    } else {
        coeffs
    };
    let denom = theta * at.dirichlet + at.omega.abs() + snap.int_abs_primitive;
    let constraint_residual = at.pohozaev_scaled().abs() / denom.max(1e-300);
    if constraint_residual > CONSTRAINT_TOL {
        return Err(Error::Numeric {
            what: format!("Pohožaev constraint violated at μ = {mu} after dilation"),
            achieved: constraint_residual,
        });
    }
    let a = model.order() / model.dim() as f64 * at.dirichlet;
    let pde_residual = model.pde_residual(mu, &u)?;
    let outside_guarantee = mu <= 0.0;
    if outside_guarantee {
        warnings.push(format!(
            "μ = {mu} ≤ 0 lies outside the range where minimizers are known to exist"
        ));
    }
    Ok(FixedMuSolution {
        mu,
        a,
        u,
        iterations,
        converged,
        constraint_residual,
        pde_residual,
        outside_guarantee,
        warnings,
        trace,
    })
}

/// Scales `v` onto the Pohožaev set: the root `c` nearest 1 of
/// `∫G(cv)/c² − μ|v|₂²/2 − A(v)/2*_s`. `None` when no root lies in `[1e-20, 1e20]`.
pub(crate) fn retract(model: &Model, mu: f64, v: &Field) -> Result<Option<Field>> {
    let spec = model.spec();
    let w = model.grid().cell_volume();
    let mass = v.mass();
    if mass == 0.0 {
        return Err(Error::degenerate("cannot retract the zero field onto the Pohožaev set"));
    }
    let fixed = 0.5 * mu * mass + model.theta() * model.op().dirichlet(v);
    let h = |lc: f64| -> f64 {
        let c = lc.exp();
        let sum: f64 = v.values().iter().map(|&x| spec.primitive(c * x)).sum();
        w * sum / (c * c) - fixed
    };
    let h0 = h(0.0);
    if !h0.is_finite() {
        return Err(Error::Numeric {
            what: "non-finite constraint value during retraction".into(),
            achieved: h0,
        });
    }
    if h0 == 0.0 {
        return Ok(Some(v.clone()));
    }
    // Expand a bracket symmetrically in log c until the sign changes.
    let mut step = 0.05f64;
    let mut bracket = None;
    let (mut lo_prev, mut hi_prev) = (0.0, 0.0);
    let (mut f_lo_prev, mut f_hi_prev) = (h0, h0);
    while step < 20.0 * std::f64::consts::LN_10 {
        let (lo, hi) = (-step, step);
        let (f_lo, f_hi) = (h(lo), h(hi));
        if f_hi.is_finite() && f_hi.signum() != f_hi_prev.signum() {
            bracket = Some((hi_prev, f_hi_prev, hi, f_hi));
            break;
        }
        if f_lo.is_finite() && f_lo.signum() != f_lo_prev.signum() {
            bracket = Some((lo, f_lo, lo_prev, f_lo_prev));
            break;
        }
        lo_prev = lo;
        hi_prev = hi;
        f_lo_prev = f_lo;
        f_hi_prev = f_hi;
        step *= 2.0;
    }
    let Some((mut a, mut fa, mut b, mut fb)) = bracket else {
        return Ok(None);
    };
    // Illinois regula falsi in log c.
    let mut side = 0i8;
    for _ in 0..200 {
        if (b - a).abs() < 1e-15 {
            break;
        }
        let c = (a * fb - b * fa) / (fb - fa);
        let fc = h(c);
        if fc == 0.0 {
            a = c;
            b = c;
            break;
        }
        if fc.signum() == fb.signum() {
            b = c;
            fb = fc;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = c;
            fa = fc;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
    }
    let c = (0.5 * (a + b)).exp();
    Ok(Some(v.scaled(c)))
}

/// Relative mass drift tolerated before the orbit is re-pinned.
const GAUGE_DRIFT: f64 = 1e-3;

/// Dilates `v` back to mass `m_ref` and re-applies the amplitude retraction
/// once the mass has drifted by more than [`GAUGE_DRIFT`].
fn regauge(model: &Model, mu: f64, v: &Field, m_ref: f64) -> Result<Option<Field>> {
    let ratio = m_ref / v.mass();
    if (ratio - 1.0).abs() <= GAUGE_DRIFT {
        return Ok(Some(v.clone()));
    }
    let t = ratio.powf(1.0 / model.dim() as f64);
    retract(model, mu, &model.op().dilate(v, t)?)
}

/// Preconditioned steepest-descent direction `−(Pg − Σ λ_i P n_i)` with the
/// multipliers making it orthogonal to every normal `n_i`.
pub(crate) fn project_off(
    grid: &crate::field::Grid,
    pg: &[f64],
    normals: &[Vec<f64>],
    precond: impl Fn(&[f64]) -> Vec<f64>,
) -> Vec<f64> {
    let pn: Vec<Vec<f64>> = normals.iter().map(|n| precond(n)).collect();
    let k = normals.len();
    let mut gram = vec![vec![0.0; k]; k];
    let mut rhs = vec![0.0; k];
    for i in 0..k {
        rhs[i] = dot(grid, &normals[i], pg);
        for j in 0..k {
            gram[i][j] = dot(grid, &normals[i], &pn[j]);
        }
    }
    let lambda = solve_small(gram, rhs);
    pg.iter()
        .enumerate()
        .map(|(idx, &g)| -(g - lambda.iter().zip(&pn).map(|(l, p)| l * p[idx]).sum::<f64>()))
        .collect()
}

/// Gaussian elimination with partial pivoting for the tiny Gram systems;
/// degenerate pivots drop the corresponding multiplier.
fn solve_small(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let k = b.len();
    let scale = a.iter().enumerate().map(|(i, r)| r[i].abs()).fold(0.0, f64::max);
    let mut active = vec![true; k];
    for col in 0..k {
        let piv = (col..k)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap_or(col);
        a.swap(col, piv);
        b.swap(col, piv);
        if a[col][col].abs() <= 1e-14 * scale {
            active[col] = false;
            continue;
        }
        for row in (col + 1)..k {
            let f = a[row][col] / a[col][col];
            let (upper, lower) = a.split_at_mut(row);
            for (x, p) in lower[0][col..k].iter_mut().zip(&upper[col][col..k]) {
                *x -= f * p;
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; k];
    for row in (0..k).rev() {
        if !active[row] {
            continue;
        }
        let tail: f64 = ((row + 1)..k).map(|c| a[row][c] * x[c]).sum();
        x[row] = (b[row] - tail) / a[row][row];
    }
    x
}
