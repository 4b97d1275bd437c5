//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

use std::process::ExitCode;
use std::time::Instant;

use pohozaev_core::benchmarks::{
    brute_force_oracle, gausson, gausson_energy, gausson_residual, linear_sanity_energy, linear_sanity_spec,
    OracleConfig, SUITE_GAUSSON_MASS,
};
use pohozaev_core::landscape::{compute_m0, legendre_kappa, max_primitive, nonexistence_beta_star, scan_a};
use pohozaev_core::quadrature::QUAD_ABS_TOL;
use pohozaev_core::solvers::{
    epsilon_continuation, shift_and_solve, solve_mass_constrained, solve_product, StageSolver,
};
use pohozaev_core::{Grid, IdentityReport, Init, Model, NonlinearitySpec, Result, SolutionRecord, SolverConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const RESIDUAL_TOL: f64 = 1e-4;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

fn schedule(depth: i32) -> Vec<f64> {
    (0..=depth).map(|k| 0.5f64.powi(k)).collect()
}

fn residuals_ok(r: &IdentityReport) -> bool {
    r.pohozaev_rel < RESIDUAL_TOL && r.nehari_rel < RESIDUAL_TOL && r.pde_rel < RESIDUAL_TOL
}

fn residual_text(r: &IdentityReport) -> String {
    format!(
        "poh {:.1e} neh {:.1e} pde {:.1e}",
        r.pohozaev_rel, r.nehari_rel, r.pde_rel
    )
}

/// Log family at `N = 1`, `s = 1/2` on a box large enough for the algebraic tail.
fn half_line_model() -> Result<Model> {
    Model::new(NonlinearitySpec::log(), Grid::new(1, 64.0, 2048)?, 0.5)
}

fn gausson_golden() -> Result<Outcome> {
    let start = Instant::now();
    let grid = Grid::new(2, 12.0, 256)?;
    let model = Model::new(NonlinearitySpec::log(), grid, 1.0)?;
    let m = SUITE_GAUSSON_MASS;
    let (exact, mu_exact) = gausson(m, grid)?;
    let res = model.pde_residual(mu_exact, &exact)?;
    let k_exact = model.energy(&exact)?;
    let cfg = SolverConfig {
        init: Init::RandomSmooth { cutoff: 1.0 },
        seed: 7,
        ..SolverConfig::default()
    };
    let rec = epsilon_continuation(&model, m, &cfg, StageSolver::Sphere)?;
    let dk = (rec.energy - k_exact).abs() / k_exact.abs();
    let dmu = (rec.mu - mu_exact).abs() / mu_exact.abs();
    let secs = start.elapsed().as_secs_f64();
    outcome(
        res < 1e-6 && dk < 5e-3 && dmu < 1e-2 && secs < 60.0,
        format!("closed-form residual {res:.1e}, dK {dk:.1e}, dmu {dmu:.1e}, {secs:.1} s"),
    )
}

fn identity_matrix() -> Result<Outcome> {
    let families = [
        ("log", NonlinearitySpec::log()),
        ("power-power", NonlinearitySpec::power_power(1.0, 1.0, 0.5, 1.5)?),
        ("log+power", NonlinearitySpec::log_power(1.0, 0.5, 1.5)?),
    ];
    // Fractional tails decay like |x|^{-(N+2s)}, so smaller s needs a larger box.
    let setups = [
        (0.4, Grid::new(1, 256.0, 8192)?),
        (0.7, Grid::new(2, 24.0, 128)?),
        (1.0, Grid::new(2, 16.0, 128)?),
    ];
    let cfg = SolverConfig {
        eps_schedule: schedule(28),
        init: Init::GaussianBump {
            width: 1.0,
            amplitude: Some(1.0),
        },
        ..SolverConfig::default()
    };
    let (mut audited, mut failed, mut worst) = (0, Vec::new(), 0.0f64);
    for (s, grid) in setups {
        for (name, spec) in &families {
            let model = Model::new(spec.clone(), grid, s)?;
            for m in [100.0, 300.0] {
                match epsilon_continuation(&model, m, &cfg, StageSolver::Sphere) {
                    Ok(rec) if rec.converged => {
                        audited += 1;
                        worst = worst.max(rec.report.max_residual());
                        if !residuals_ok(&rec.report) {
                            failed.push(format!("s={s} {name} m={m}: {}", residual_text(&rec.report)));
                        }
                    }
                    Ok(_) => failed.push(format!("s={s} {name} m={m}: not converged")),
                    Err(e) => failed.push(format!("s={s} {name} m={m}: {e}")),
                }
            }
        }
    }
    outcome(
        failed.is_empty() && audited == 18,
        format!("{audited}/18 audited, worst residual {worst:.1e}; failures {failed:?}"),
    )
}

fn infima_equalities() -> Result<Outcome> {
    let model = half_line_model()?;
    let m = 30.0;
    let cfg = SolverConfig {
        eps_schedule: schedule(20),
        ..SolverConfig::default()
    };
    let sphere = epsilon_continuation(&model, m, &cfg, StageSolver::Sphere)?;
    let product = epsilon_continuation(&model, m, &cfg, StageSolver::Product)?;
    let ball = epsilon_continuation(&model, m, &cfg, StageSolver::Ball)?;
    let gap = (sphere.energy - product.energy).abs() / sphere.energy.abs();
    let mass_err = (ball.u.mass() - m).abs() / m;
    outcome(
        gap < 1e-2 && mass_err < 1e-6,
        format!(
            "kappa {:.6}, d {:.6}, gap {gap:.1e}; ball mass error {mass_err:.1e}",
            sphere.energy, product.energy
        ),
    )
}

fn legendre_and_signs(
    samples_cache: &mut Option<pohozaev_core::LandscapeSamples>,
) -> Result<pohozaev_core::LandscapeSamples> {
    if let Some(s) = samples_cache {
        return Ok(s.clone());
    }
    // a(μ) = C e^μ here, so m₀ sits at μ = 1 and b^30 near μ = 1.9.
    let mus: Vec<f64> = (0..=27).map(|k| 0.3 * 10f64.powf(k as f64 / 27.0)).collect();
    let samples = scan_a(&half_line_model()?, &mus, &SolverConfig::default(), 0)?;
    *samples_cache = Some(samples.clone());
    Ok(samples)
}

fn legendre_transform(cache: &mut Option<pohozaev_core::LandscapeSamples>) -> Result<Outcome> {
    let samples = legendre_and_signs(cache)?;
    let model = half_line_model()?;
    let m = 30.0;
    let lv = legendre_kappa(&samples, m)?;
    let cfg = SolverConfig {
        eps_schedule: schedule(20),
        ..SolverConfig::default()
    };
    let kappa = epsilon_continuation(&model, m, &cfg, StageSolver::Sphere)?;
    let product = epsilon_continuation(&model, m, &cfg, StageSolver::Product)?;
    let db = (lv.b - kappa.energy).abs() / kappa.energy.abs();
    let dmu = (lv.mu_star - product.mu).abs() / product.mu.abs();
    outcome(
        db < 2e-2 && dmu < 5e-2,
        format!(
            "b {:.5} vs kappa {:.5} ({db:.1e}); mu* {:.4} vs {:.4} ({dmu:.1e})",
            lv.b, kappa.energy, lv.mu_star, product.mu
        ),
    )
}

fn sign_claims(cache: &mut Option<pohozaev_core::LandscapeSamples>) -> Result<Outcome> {
    let samples = legendre_and_signs(cache)?;
    let m0 = compute_m0(&samples)?.m0;
    let m = 2.0 * m0;
    let cfg = SolverConfig {
        eps_schedule: schedule(20),
        ..SolverConfig::default()
    };
    let large = solve_product(&half_line_model()?, m, &cfg)?;
    let large_ok = large.mu > 0.0 && large.energy < 0.0;

    let small_model = Model::new(NonlinearitySpec::log(), Grid::new(2, 16.0, 128)?, 1.0)?;
    let small_cfg = SolverConfig {
        eps_schedule: schedule(28),
        ..SolverConfig::default()
    };
    let small = shift_and_solve(&small_model, 2.0, 2.0, &small_cfg, StageSolver::Sphere)?;
    let small_ok = small.converged && residuals_ok(&small.report);
    outcome(
        large_ok && small_ok,
        format!(
            "m0 {m0:.4}, at m = {m:.4}: mu {:.4}, K {:.4}; shifted small mass: {}",
            large.mu,
            large.energy,
            residual_text(&small.report)
        ),
    )
}

fn epsilon_machinery() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let bases = [
        NonlinearitySpec::log(),
        NonlinearitySpec::power_power(1.0, 1.0, 0.5, 1.5)?,
        NonlinearitySpec::log_power(1.0, 0.5, 1.5)?,
    ];
    let mut violations = 0usize;
    let mut triples = 0usize;
    for k in 0..100 {
        let base = &bases[k % bases.len()];
        let e1: f64 = rng.random_range(1e-6..1.0);
        let e2: f64 = rng.random_range(1e-7..e1);
        let (p1, p2) = (base.perturb(e1)?, base.perturb(e2)?);
        for _ in 0..100 {
            let t = 10f64.powf(rng.random_range(-8.0..1.5)) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let (g1, g2, g0) = (p1.eval_primitive(t)?, p2.eval_primitive(t)?, base.eval_primitive(t)?);
            // Primitives carry the quadrature's absolute error budget.
            let slack = QUAD_ABS_TOL + 1e-12 * g0.abs();
            if g1 < g2 - slack || g2 < g0 - slack {
                violations += 1;
            }
            triples += 1;
        }
    }

    // Along a decreasing schedule the stage minima may only grow: K_ε is
    // nonincreasing as a function of ε.
    let grid = Grid::new(2, 16.0, 128)?;
    let model = Model::new(NonlinearitySpec::log(), grid, 1.0)?;
    let cfg = SolverConfig::default();
    let rec = epsilon_continuation(&model, SUITE_GAUSSON_MASS, &cfg, StageSolver::Sphere)?;
    let drops = rec
        .stages
        .windows(2)
        .filter(|w| w[1].energy < w[0].energy - 10.0 * cfg.energy_stall_tol * w[0].energy.abs().max(1.0))
        .count();
    outcome(
        violations == 0 && drops == 0 && rec.converged && residuals_ok(&rec.report),
        format!(
            "{violations} violations in {triples} triples; {drops} stage drops over {} stages; final {}",
            rec.stages.len(),
            residual_text(&rec.report)
        ),
    )
}

fn nonexistence_threshold() -> Result<Outcome> {
    let mut flips = 0;
    let cases = [(1.0, 2.0), (1.0, 3.0), (2.0, 2.5)];
    let mut detail = Vec::new();
    for (alpha, q) in cases {
        let bs = nonexistence_beta_star(alpha, q)?;
        let below = max_primitive(&NonlinearitySpec::log_power(alpha, bs - 1e-3, q)?, 1e-6, 1e3, 4000)?.1;
        let above = max_primitive(&NonlinearitySpec::log_power(alpha, bs + 1e-3, q)?, 1e-6, 1e3, 4000)?.1;
        if below <= 0.0 && above > 0.0 {
            flips += 1;
        }
        detail.push(format!("({alpha},{q}): {below:.1e} / {above:.1e}"));
    }
    outcome(flips == cases.len(), format!("{flips}/3 flips; {}", detail.join(", ")))
}

fn monotone_landscape(cache: &mut Option<pohozaev_core::LandscapeSamples>) -> Result<Outcome> {
    let samples = legendre_and_signs(cache)?;
    let pairs: Vec<(f64, f64)> = samples.converged_pairs().map(|(_, mu, a)| (mu, a)).collect();
    let decade = pairs.last().map(|p| p.0).unwrap_or(0.0) / pairs.first().map(|p| p.0).unwrap_or(1.0);
    let increasing = pairs.windows(2).all(|w| w[1].1 > w[0].1 * (1.0 + 1e-3));
    let positive = pairs.iter().all(|p| p.1 > 0.0);
    outcome(
        increasing && positive && decade >= 10.0 - 1e-9,
        format!(
            "{} converged samples over mu in [{:.3}, {:.3}], violations {:?}",
            pairs.len(),
            pairs.first().map(|p| p.0).unwrap_or(f64::NAN),
            pairs.last().map(|p| p.0).unwrap_or(f64::NAN),
            samples.monotonicity_violations(1e-3)
        ),
    )
}

fn oracle_equivalence() -> Result<Outcome> {
    let model = Model::new(NonlinearitySpec::log(), Grid::new(1, 16.0, 32)?, 0.5)?;
    let m = 30.0;
    let oracle = brute_force_oracle(&model, m, &OracleConfig::default())?;
    let solved: SolutionRecord = epsilon_continuation(&model, m, &SolverConfig::default(), StageSolver::Sphere)?;
    let log_gap = (oracle.energy - solved.energy).abs() / solved.energy.abs();

    let lin = Model::new(linear_sanity_spec(), Grid::new(1, 4.0, 32)?, 0.5)?;
    let lin_oracle = brute_force_oracle(&lin, 2.0, &OracleConfig::default())?;
    let lin_cfg = SolverConfig {
        check_box: false,
        ..SolverConfig::default()
    };
    let lin_solved = solve_mass_constrained(&lin, 2.0, &lin_cfg, false)?;
    let exact = linear_sanity_energy(2.0);
    let lin_gap = (lin_oracle.energy - lin_solved.energy).abs() / exact;
    outcome(
        log_gap < 1e-2 && lin_gap < 1e-3,
        format!(
            "log: oracle {:.6} solver {:.6} ({log_gap:.1e}); linear gap {lin_gap:.1e}",
            oracle.energy, solved.energy
        ),
    )
}

fn discretization_validity() -> Result<Outcome> {
    let m = SUITE_GAUSSON_MASS;
    let gain = gausson_residual(m, 12.0, 32)? / gausson_residual(m, 12.0, 64)?;
    let k1 = gausson_energy(m, 12.0, 128)?;
    let k2 = gausson_energy(m, 24.0, 256)?;
    let closed = (k1 - k2).abs() / k1.abs();

    let solve = |l: f64, n: usize| -> Result<f64> {
        let model = Model::new(NonlinearitySpec::log(), Grid::new(2, l, n)?, 1.0)?;
        Ok(epsilon_continuation(&model, m, &SolverConfig::default(), StageSolver::Sphere)?.energy)
    };
    let (s1, s2) = (solve(12.0, 64)?, solve(24.0, 128)?);
    let solved = (s1 - s2).abs() / s1.abs();
    outcome(
        gain >= 10.0 && closed < 1e-6 && solved < 1e-6,
        format!("refinement gain {gain:.1e}; box doubling {closed:.1e} (closed form), {solved:.1e} (solver)"),
    )
}

fn main() -> ExitCode {
    let mut cache = None;
    let mut all = true;
    let mut report = |id: usize, name: &str, run: &mut dyn FnMut() -> Result<Outcome>| {
        let start = Instant::now();
        let (pass, detail) = match run() {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        all &= pass;
        println!(
            "{} criterion {id:>2} {name}: {detail} [{:.1} s]",
            if pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    };
    report(1, "gausson golden test", &mut gausson_golden);
    report(2, "identity audit matrix", &mut identity_matrix);
    report(3, "infima equalities", &mut infima_equalities);
    report(4, "legendre transform", &mut || legendre_transform(&mut cache));
    report(5, "sign claims", &mut || sign_claims(&mut cache));
    report(6, "epsilon machinery", &mut epsilon_machinery);
    report(7, "nonexistence threshold", &mut nonexistence_threshold);
    report(8, "monotonicity of a", &mut || monotone_landscape(&mut cache));
    report(9, "oracle equivalence", &mut oracle_equivalence);
    report(10, "discretization validity", &mut discretization_validity);
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
