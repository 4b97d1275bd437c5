use std::collections::VecDeque;

use super::fixed_mu::project_off;
use super::{
    check_box, dot, initial_field, precondition, RunInfo, SolutionRecord, SolverConfig, StallWatch, State, TraceRow,
};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::functionals::Model;

const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 40;
const OSCILLATION_WINDOW: usize = 100;

/// Minimizes `I^m` over pairs `(μ, u)` on the Pohožaev set.
///
/// Each iteration first sets `μ ← (2/|u|₂²)(∫G(u) − A/2*_s)`, which places the
/// pair on the set, and then takes a preconditioned descent step in `u` on
/// the reduced Lagrangian
///
/// ```text
/// F(u) = I^m(μ(u), u) = (s/N)A − (m/|u|₂²)(∫G(u) − A/2*_s),
/// ```
///
/// which coincides with `K` on the sphere. Steps are accepted under an Armijo
/// condition. A multiplier that swings by more than ten times its mean
/// magnitude (at least one) within 100 iterations aborts the run.
///
/// `F` is nearly flat along a valley that leaves the sphere: at `N = 2s` it
/// is exactly invariant under `u ↦ u(·/t)`, and for `N > 2s` a field of mass
/// `1.003m` already matches the infimum to `1e−6`. Unconstrained descent then
/// drifts in mass, so steps are taken orthogonally to the mass gradient and
/// each trial is rescaled to mass `m`.
pub fn solve_product(model: &Model, m: f64, config: &SolverConfig) -> Result<SolutionRecord> {
    product(model, m, config, true)
}

pub(crate) fn product(model: &Model, m: f64, config: &SolverConfig, box_check: bool) -> Result<SolutionRecord> {
    config.validate()?;
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::domain(format!("mass m = {m} must be positive")));
    }
    let grid = *model.grid();
    let theta = model.theta();
    let sn = model.order() / model.dim() as f64;

    let mut u = initial_field(model.spec(), grid, &config.init, config.seed)?.l2_project(m)?;
    let reduced = |st: &State| -> (f64, f64) {
        let mu = 2.0 / st.mass * (st.int_primitive - theta * st.dirichlet);
        (sn * st.dirichlet - 0.5 * mu * m, mu)
    };

    let mut state = State::new(model, &u)?;
    let (mut f, mut mu) = reduced(&state);
    let mut alpha = config.tau;
    let mut stall = StallWatch::new(config.energy_stall_tol);
    let mut window: VecDeque<f64> = VecDeque::with_capacity(OSCILLATION_WINDOW + 1);
    let mut run = RunInfo::default();

    for iter in 1..=config.max_iters {
        run.iterations = iter;
        let ratio = m / state.mass;
        let res = state.residual(&u, mu).max((state.mass - m).abs() / m);
        if config.trace {
            run.trace.push(TraceRow {
                iteration: iter,
                energy: f,
                mass: state.mass,
                mu,
                grad_norm: res,
            });
        }
        window.push_back(mu);
        if window.len() > OSCILLATION_WINDOW {
            window.pop_front();
            let (lo, hi) = window
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
            let mean = window.iter().map(|x| x.abs()).sum::<f64>() / window.len() as f64;
            if hi - lo > 10.0 * mean.max(1.0) {
                return Err(Error::NonConvergence(format!(
                    "multiplier oscillates over [{lo:.4e}, {hi:.4e}] within {OSCILLATION_WINDOW} iterations"
                )));
            }
        }
        if res < config.grad_tol || stall.push(f) {
            run.converged = true;
            break;
        }

        let coef = 2.0 * (sn + theta * ratio);
        let grad: Vec<f64> = u
            .values()
            .iter()
            .zip(&state.lu)
            .zip(&state.gu)
            .map(|((&v, &l), &g)| coef * l - ratio * g + ratio * mu * v)
            .collect();
        let sigma = mu.abs().max(1.0);
        let pg = precondition(model, &grad, sigma);
        let normal: Vec<f64> = u.values().iter().map(|v| 2.0 * v).collect();
        let dir = project_off(&grid, &pg, &[normal], |g| precondition(model, g, sigma));
        let slope = -dot(&grid, &grad, &dir);

        let mut moved = false;
        for _ in 0..MAX_BACKTRACKS {
            let trial =
                Field::from_vec_unchecked(grid, u.values().iter().zip(&dir).map(|(v, d)| v + alpha * d).collect());
            if trial.mass() > 0.0 {
                let trial = trial.l2_project(m)?;
                if let Ok(st) = State::new(model, &trial) {
                    let (f_next, mu_next) = reduced(&st);
                    if f_next <= f - ARMIJO * alpha * slope {
                        u = trial;
                        state = st;
                        f = f_next;
                        mu = mu_next;
                        moved = true;
                        break;
                    }
                }
            }
            alpha *= 0.5;
        }
        if !moved {
            run.converged = res < config.grad_tol.sqrt();
            break;
        }
        alpha *= 2.0;
    }

    if box_check && config.check_box {
        check_box(&u, &mut run.warnings)?;
    }
    let snap = model.snapshot(&u)?;
    let mu = model.mu_from_snapshot(&snap, None)?;
    let record = SolutionRecord::audit(model, mu, u, m, run)?;
    let expect = sn * snap.dirichlet - 0.5 * mu * m;
    let gap = (record.lagrangian - expect).abs() / expect.abs().max(snap.dirichlet).max(1e-300);
    if gap > 1e-8 {
        return Err(Error::Numeric {
            what: "I^m departs from (s/N)A − μm/2 on the Pohožaev set".into(),
            achieved: gap,
        });
    }
    Ok(record)
}
