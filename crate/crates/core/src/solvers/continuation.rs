use super::flow::flow;
use super::product::product;
use super::{check_box, Init, SolutionRecord, SolverConfig};
use crate::error::{Error, Result};
use crate::functionals::Model;

/// Solver run at each continuation stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StageSolver {
    #[default]
    Sphere,
    Ball,
    Product,
}

/// Summary of one continuation stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageSummary {
    pub eps: f64,
    /// `K_ε(u_ε)` under the perturbed spec of the stage.
    pub energy: f64,
    /// `∫G₋(u_ε)` under the unperturbed spec.
    pub int_g_minus: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Solves along the ε schedule, warm-starting each stage from the raw field
/// of the previous one, and audits the final pair under the unperturbed spec.
/// Only the final field is checked for decay toward the box edge.
///
/// Since `G_ε ≥ G_ε'` for `ε > ε'`, the stage minima `K_{ε_k}(u_{ε_k})` can only
/// grow along a decreasing schedule; a drop larger than
/// `10·energy_stall_tol·max(|K|, 1)` is attached to the record as a warning.
pub fn epsilon_continuation(
    model: &Model,
    m: f64,
    config: &SolverConfig,
    solver: StageSolver,
) -> Result<SolutionRecord> {
    config.validate()?;
    if config.eps_schedule.is_empty() {
        return Err(Error::domain("eps_schedule is empty"));
    }
    let base = model.spec().unperturbed();
    let base_model = model.with_spec(base.clone());
    let mut stage_cfg = config.clone();
    let mut stages: Vec<StageSummary> = Vec::new();
    let mut last: Option<SolutionRecord> = None;
    let mut iterations = 0;
    let mut trace = Vec::new();

    for (k, &eps) in config.eps_schedule.iter().enumerate() {
        let wrap = |e: Error| Error::Stage {
            stage: k,
            eps,
            source: Box::new(e),
        };
        let stage_model = model.with_spec(base.perturb(eps).map_err(wrap)?);
        if let Some(prev) = &last {
            stage_cfg.init = Init::Field(prev.u.clone());
        }
        let final_stage = k + 1 == config.eps_schedule.len();
        stage_cfg.grad_tol = if final_stage {
            config.grad_tol
        } else {
            config.stage_grad_tol.max(config.grad_tol)
        };
        let rec = match solver {
            StageSolver::Sphere => flow(&stage_model, m, &stage_cfg, false, false),
            StageSolver::Ball => flow(&stage_model, m, &stage_cfg, true, false),
            StageSolver::Product => product(&stage_model, m, &stage_cfg, false),
        }
        .map_err(wrap)?;
        iterations += rec.iterations;
        trace.extend(rec.trace.iter().map(|r| super::TraceRow {
            iteration: iterations - rec.iterations + r.iteration,
            ..*r
        }));
        stages.push(StageSummary {
            eps,
            energy: rec.energy,
            int_g_minus: base_model.int_g_minus(&rec.u).map_err(wrap)?,
            iterations: rec.iterations,
            converged: rec.converged,
        });
        last = Some(rec);
    }

    let last = last.expect("schedule is nonempty");
    let mut warnings = last.warnings.clone();
    if config.check_box {
        check_box(&last.u, &mut warnings)?;
    }
    for w in stages.windows(2) {
        let slack = 10.0 * config.energy_stall_tol * w[0].energy.abs().max(1.0);
        if w[1].energy < w[0].energy - slack {
            warnings.push(format!(
                "stage energy decreased from {:.10e} (eps = {:e}) to {:.10e} (eps = {:e})",
                w[0].energy, w[0].eps, w[1].energy, w[1].eps
            ));
        }
    }
    let mu = base_model.mu_from_pohozaev(&last.u, None)?;
    let run = super::RunInfo {
        iterations,
        converged: last.converged,
        warnings,
        trace,
    };
    let mut rec = SolutionRecord::audit(&base_model, mu, last.u, m, run)?;
    rec.eps_final = *config.eps_schedule.last().expect("nonempty");
    rec.stages = stages;
    Ok(rec)
}

/// Solves with `h_ω(t) = g(t) + ωt` and maps back: `μ₀ = μ_ω − ω`,
/// `K(u) = K_ω(u) + (ω/2)|u|₂²`. The returned record is audited under the
/// unperturbed original spec.
pub fn shift_and_solve(
    model: &Model,
    m: f64,
    omega: f64,
    config: &SolverConfig,
    solver: StageSolver,
) -> Result<SolutionRecord> {
    if !(omega >= 0.0 && omega.is_finite()) {
        return Err(Error::domain(format!("shift ω = {omega} must be nonnegative")));
    }
    let base = model.spec().unperturbed();
    let shifted = model.with_spec(base.shift(omega)?);
    let rec = epsilon_continuation(&shifted, m, config, solver)?;
    let base_model = model.with_spec(base);
    let mu0 = rec.mu - omega;
    let shifted_energy = rec.energy;
    let mass = rec.u.mass();
    let run = super::RunInfo {
        iterations: rec.iterations,
        converged: rec.converged,
        warnings: rec.warnings,
        trace: rec.trace,
    };
    let mut out = SolutionRecord::audit(&base_model, mu0, rec.u, m, run)?;
    out.eps_final = rec.eps_final;
    out.stages = rec.stages;
    out.energy_via_shift = Some(shifted_energy + 0.5 * omega * mass);
    Ok(out)
}
