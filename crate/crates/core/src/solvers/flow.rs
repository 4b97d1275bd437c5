use super::{
    check_box, initial_field, stabilizer, RunInfo, SolutionRecord, SolverConfig, StallWatch, State, TraceRow,
    DIVERGENCE_WINDOW, MAX_HALVINGS,
};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::functionals::Model;

/// Minimizes `K` on the sphere `∫u² = m` (or the ball `∫u² ≤ m`) by the
/// stabilized semi-implicit flow
///
/// ```text
/// u ← (1 + τ(−Δ)^s + τc)^{-1} (u + τ(g(u) + (c + β) u)),
/// ```
///
/// with the multiplier `β` chosen so that the update is L²-orthogonal to `u`,
/// followed by projection onto the sphere (ball mode: only when the mass
/// exceeds `m`, and `β = 0` inside the ball). `c = max(0, −min g′)` over the current range of `|u|`,
/// capped at [`SolverConfig::stab_cap`]. A step that raises the energy is
/// retried with `τ/2`, at most 20 times; 50 consecutive increases abort.
///
/// The reported multiplier is the Pohožaev one; the flow's own estimate
/// `(∫g(u)u − A)/|u|₂²` is kept in [`SolutionRecord::mu_flow`].
pub fn solve_mass_constrained(model: &Model, m: f64, config: &SolverConfig, ball_mode: bool) -> Result<SolutionRecord> {
    flow(model, m, config, ball_mode, true)
}

pub(crate) fn flow(
    model: &Model,
    m: f64,
    config: &SolverConfig,
    ball_mode: bool,
    box_check: bool,
) -> Result<SolutionRecord> {
    config.validate()?;
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::domain(format!("mass m = {m} must be positive")));
    }
    let grid = *model.grid();
    let spec = model.spec();
    let project = |v: Field| -> Result<Field> {
        if !ball_mode || v.mass() > m {
            v.l2_project(m)
        } else {
            Ok(v)
        }
    };

    // Ball mode also starts on the sphere: for sublinear g the origin is a
    // strict local minimizer of K, and a small start would be drawn into it.
    let mut u = initial_field(spec, grid, &config.init, config.seed)?.l2_project(m)?;
    let mut state = State::new(model, &u)?;
    let mut energy = state.energy();
    let mut tau = config.tau;
    let mut stall = StallWatch::new(config.energy_stall_tol);
    let mut run = RunInfo::default();
    let mut increases = 0usize;

    for iter in 1..=config.max_iters {
        let c = stabilizer(spec, &u, config.stab_cap);
        let slack = 1e-13 * state.dirichlet.max(state.int_primitive.abs()).max(1e-300);
        let mut accepted = None;
        let sphere_step = !ball_mode || state.mass >= m * (1.0 - 1e-12);
        for _ in 0..=MAX_HALVINGS {
            let a = 1.0 + tau * c;
            let grad: Vec<f64> = state.lu.iter().zip(&state.gu).map(|(l, g)| l - g).collect();
            let pg = model.op().solve_shifted(&Field::from_vec_unchecked(grid, grad), a, tau);
            let beta = if sphere_step {
                let pu = model.op().solve_shifted(&u, a, tau);
                u.inner(&pg) / u.inner(&pu)
            } else {
                0.0
            };
            let rhs: Vec<f64> = u
                .values()
                .iter()
                .zip(&state.gu)
                .map(|(&v, &g)| v + tau * (g + (c + beta) * v))
                .collect();
            let step = model.op().solve_shifted(&Field::from_vec_unchecked(grid, rhs), a, tau);
            let next = project(step)?;
            let next_state = State::new(model, &next)?;
            let decreased = next_state.energy() <= energy + slack;
            let last = decreased || tau < config.tau * 0.5f64.powi(MAX_HALVINGS as i32);
            if decreased || last {
                accepted = Some((next, next_state, decreased));
                break;
            }
            tau *= 0.5;
        }
        let (next, next_state, decreased) = accepted.expect("halving loop always accepts");
        if decreased {
            increases = 0;
        } else {
            increases += 1;
            if increases >= DIVERGENCE_WINDOW {
                return Err(Error::Diverged {
                    iterations: iter,
                    reason: format!("energy increased on {DIVERGENCE_WINDOW} consecutive steps"),
                });
            }
        }
        u = next;
        state = next_state;
        energy = state.energy();
        if !u.values().iter().all(|v| v.is_finite()) {
            return Err(Error::Diverged {
                iterations: iter,
                reason: "non-finite iterate".into(),
            });
        }

        let on_sphere = !ball_mode || state.mass >= m * (1.0 - 1e-12);
        let mu = if on_sphere { state.mu_nehari() } else { 0.0 };
        let res = state.residual(&u, mu);
        run.iterations = iter;
        if config.trace {
            run.trace.push(TraceRow {
                iteration: iter,
                energy,
                mass: state.mass,
                mu,
                grad_norm: res,
            });
        }
        if res < config.grad_tol || stall.push(energy) {
            run.converged = true;
            break;
        }
        tau = (tau * 1.25).min(config.tau);
    }

    if box_check && config.check_box {
        check_box(&u, &mut run.warnings)?;
    }
    let mu = model.mu_from_pohozaev(&u, None)?;
    SolutionRecord::audit(model, mu, u, m, run)
}
