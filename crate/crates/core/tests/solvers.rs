use pohozaev_core::field::schwarz_rearrange;
use pohozaev_core::landscape::{compute_m0, legendre_kappa, scan_a};
use pohozaev_core::solvers::{
    epsilon_continuation, shift_and_solve, solve_fixed_mu, solve_mass_constrained, solve_product, StageSolver,
};
use pohozaev_core::{mu_bar0, Error, Field, Grid, Init, Model, MuBarScan, NonlinearitySpec, SolverConfig};

/// Log family, `N = 1`, `s = 1/2`, box wide enough for mass minimizers near `m = 30`.
fn small_log() -> Model {
    Model::new(NonlinearitySpec::log(), Grid::new(1, 16.0, 256).unwrap(), 0.5).unwrap()
}

/// Same family on a box wide enough for the fixed-frequency profiles.
fn wide_log() -> Model {
    Model::new(NonlinearitySpec::log(), Grid::new(1, 64.0, 1024).unwrap(), 0.5).unwrap()
}

fn stage(model: &Model, eps: f64) -> Model {
    model.with_spec(model.spec().perturb(eps).unwrap())
}

#[test]
fn zero_initialization_is_degenerate() {
    let model = stage(&small_log(), 0.1);
    let cfg = SolverConfig {
        init: Init::Field(Field::zeros(*model.grid())),
        ..SolverConfig::default()
    };
    assert!(matches!(
        solve_mass_constrained(&model, 30.0, &cfg, false),
        Err(Error::Degenerate(_))
    ));
}

#[test]
fn sphere_flow_keeps_mass_and_descends() {
    let model = stage(&wide_log(), 0.05);
    let cfg = SolverConfig {
        trace: true,
        ..SolverConfig::default()
    };
    let rec = solve_mass_constrained(&model, 30.0, &cfg, false).unwrap();
    assert!(!rec.trace.is_empty());
    for row in &rec.trace {
        assert!((row.mass - 30.0).abs() < 1e-10 * 30.0, "mass {}", row.mass);
    }
    for w in rec.trace.windows(2) {
        assert!(
            w[1].energy <= w[0].energy + 1e-10 * w[0].energy.abs().max(1.0),
            "{} -> {}",
            w[0].energy,
            w[1].energy
        );
    }
}

#[test]
fn converged_record_properties() {
    // s = 1 has Gaussian tails, so the box does not pollute the multipliers.
    let model = Model::new(NonlinearitySpec::log(), Grid::new(2, 16.0, 128).unwrap(), 1.0).unwrap();
    let m = std::f64::consts::PI * 4f64.exp();
    let rec = epsilon_continuation(&model, m, &SolverConfig::default(), StageSolver::Sphere).unwrap();
    assert!(rec.converged);
    assert!(rec.multiplier_gap() < 1e-3, "gap {}", rec.multiplier_gap());
    // Odd g with a nonnegative start stays nonnegative.
    let peak = rec.u.max_abs();
    assert!(rec.u.values().iter().all(|&v| v >= -1e-8 * peak));
    // Symmetric start: the minimizer is its own rearrangement after centering.
    let clipped = rec.u.centered().map(|v| v.max(0.0));
    let star = schwarz_rearrange(&clipped).unwrap();
    let diff: f64 = clipped
        .values()
        .iter()
        .zip(star.values())
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>();
    assert!((diff / clipped.values().iter().map(|a| a * a).sum::<f64>()).sqrt() < 1e-3);
    assert!(rec.report.pohozaev_rel < 1e-4);
}

#[test]
fn continuation_stage_sequence() {
    let model = small_log();
    let rec = epsilon_continuation(&model, 30.0, &SolverConfig::default(), StageSolver::Sphere).unwrap();
    assert_eq!(rec.stages.len(), 15);
    // G_ε ≥ G_ε' for ε > ε', so the stage minima grow as ε shrinks.
    for w in rec.stages.windows(2) {
        assert!(w[1].energy >= w[0].energy - 1e-10 * w[0].energy.abs().max(1.0));
    }
    let k = rec.stages.len();
    let (a, b) = (rec.stages[k - 2].int_g_minus, rec.stages[k - 1].int_g_minus);
    assert!(b.is_finite() && (a - b).abs() < 1e-2 * b.abs(), "{a} vs {b}");
}

#[test]
fn stage_failures_carry_the_index() {
    let cfg = SolverConfig {
        init: Init::Field(Field::zeros(*small_log().grid())),
        ..SolverConfig::default()
    };
    match epsilon_continuation(&small_log(), 30.0, &cfg, StageSolver::Sphere) {
        Err(Error::Stage { stage, eps, .. }) => assert_eq!((stage, eps), (0, 1.0)),
        other => panic!("expected a stage error, got {other:?}"),
    }
}

#[test]
fn ball_and_product_land_on_the_sphere() {
    let model = small_log();
    let ball = epsilon_continuation(&model, 30.0, &SolverConfig::default(), StageSolver::Ball).unwrap();
    assert!((ball.u.mass() - 30.0).abs() < 1e-6 * 30.0);
    let product = epsilon_continuation(&model, 30.0, &SolverConfig::default(), StageSolver::Product).unwrap();
    assert!((product.u.mass() - 30.0).abs() < 1e-6 * 30.0);
    let sphere = epsilon_continuation(&model, 30.0, &SolverConfig::default(), StageSolver::Sphere).unwrap();
    assert!((product.energy - sphere.energy).abs() < 1e-2 * sphere.energy.abs());
    assert!(product.mu > 0.0 && product.energy < 0.0);
    let direct = solve_product(&stage(&model, 1e-3), 30.0, &SolverConfig::default()).unwrap();
    assert!((direct.u.mass() - 30.0).abs() < 1e-6 * 30.0);
}

#[test]
fn shift_and_solve_consistency() {
    let model = small_log();
    let cfg = SolverConfig::default();
    let plain = epsilon_continuation(&model, 30.0, &cfg, StageSolver::Sphere).unwrap();
    let zero = shift_and_solve(&model, 30.0, 0.0, &cfg, StageSolver::Sphere).unwrap();
    assert_eq!(plain.u.values(), zero.u.values());
    assert_eq!(plain.mu, zero.mu);

    let shifted = shift_and_solve(&model, 30.0, 1.5, &cfg, StageSolver::Sphere).unwrap();
    let via = shifted.energy_via_shift.unwrap();
    assert!((via - shifted.energy).abs() < 1e-10 * shifted.energy.abs().max(1.0));
    assert!((shifted.energy - plain.energy).abs() < 1e-6 * plain.energy.abs());
    assert!(matches!(
        shift_and_solve(&model, 30.0, -1.0, &cfg, StageSolver::Sphere),
        Err(Error::Domain(_))
    ));
}

#[test]
fn fixed_mu_landscape_facts() {
    let model = wide_log();
    let cfg = SolverConfig::default();
    let a1 = solve_fixed_mu(&model, 0.5, &cfg).unwrap();
    let a2 = solve_fixed_mu(&model, 1.5, &cfg).unwrap();
    assert!(a1.converged && a2.converged);
    assert!(a1.a > 0.0 && a1.a < a2.a);
    assert!(!a1.outside_guarantee);
    // N = 2s for the log family: a(μ) = C e^μ.
    assert!(((a2.a / a1.a).ln() - 1.0).abs() < 1e-3, "ratio {}", a2.a / a1.a);

    let neg = solve_fixed_mu(&model, -0.5, &cfg).unwrap();
    assert!(neg.outside_guarantee);
}

#[test]
fn fixed_mu_rejects_frequencies_past_mu_bar() {
    let spec = NonlinearitySpec::power_power(1.3, 0.8, 0.3, 0.7).unwrap();
    let ceiling = mu_bar0(&spec, MuBarScan::default()).unwrap();
    let model = Model::new(spec, Grid::new(1, 16.0, 256).unwrap(), 0.4).unwrap();
    let r = solve_fixed_mu(&model, 2.0 * ceiling, &SolverConfig::default());
    assert!(matches!(r, Err(Error::Domain(_))), "{r:?}");
}

#[test]
fn pure_power_scaling_law() {
    // g(t) = |t|t. If u₁ solves the μ = 1 equation then
    // u_μ(x) = μ u₁(μ^{1/(2s)} x) solves it at μ, and A(u_μ) = μ^{2 + 1 − N/(2s)} A(u₁).
    let (n, s, q) = (1.0, 0.4, 2.0);
    let exponent = 2.0 / (q - 1.0) + 1.0 - n / (2.0 * s);
    let model = Model::new(
        NonlinearitySpec::log_power(0.0, 1.0, q).unwrap(),
        Grid::new(1, 128.0, 4096).unwrap(),
        s,
    )
    .unwrap();
    let cfg = SolverConfig::default();
    let a1 = solve_fixed_mu(&model, 1.0, &cfg).unwrap().a;
    let a2 = solve_fixed_mu(&model, 2.0, &cfg).unwrap().a;
    let predicted = a1 * 2f64.powf(exponent);
    assert!((a2 - predicted).abs() < 1e-2 * predicted, "{a2} vs {predicted}");
}

#[test]
fn landscape_thresholds_and_legendre_bound() {
    let model = wide_log();
    let mus: Vec<f64> = (0..12).map(|k| 0.3 * 10f64.powf(k as f64 / 11.0)).collect();
    let samples = scan_a(&model, &mus, &SolverConfig::default(), 0).unwrap();
    let pairs: Vec<(f64, f64)> = samples.converged_pairs().map(|(_, mu, a)| (mu, a)).collect();
    assert!(pairs.len() >= 10);
    assert!(samples.monotonicity_violations(1e-3).is_empty());
    let (first, last) = (pairs[0], pairs[pairs.len() - 1]);
    assert!(last.1 / last.0 > first.1 / first.0);

    let m0 = compute_m0(&samples).unwrap();
    assert!(m0.m0.is_finite() && m0.m0 > 0.0 && m0.upper_bound_only);
    assert!(legendre_kappa(&samples, 0.95 * m0.m0).unwrap().b >= 0.0);
    let lv = legendre_kappa(&samples, 30.0).unwrap();
    assert!(lv.b < 0.0);

    let rec = epsilon_continuation(&model, 30.0, &SolverConfig::default(), StageSolver::Product).unwrap();
    let lagrangian = model.lagrangian(rec.mu, &rec.u, 30.0).unwrap();
    assert!(lagrangian >= lv.b - 1e-2 * lv.b.abs(), "{lagrangian} vs {}", lv.b);

    // a_ω(μ) = a(μ − ω) for the shifted nonlinearity g + ωt.
    let omega = 0.5;
    let shifted = model.with_spec(model.spec().shift(omega).unwrap());
    let cfg = SolverConfig::default();
    for mu in [1.0, 2.0] {
        let base = solve_fixed_mu(&model, mu, &cfg).unwrap().a;
        let moved = solve_fixed_mu(&shifted, mu + omega, &cfg).unwrap().a;
        assert!((base - moved).abs() < 1e-4 * base, "{base} vs {moved}");
    }
}

#[test]
fn product_matches_sphere_away_from_n_equal_2s() {
    // θ > 0: the reduced functional is nearly flat off the sphere, so a
    // solver that drifts in mass reports K at the wrong mass.
    let model = Model::new(NonlinearitySpec::log(), Grid::new(1, 64.0, 2048).unwrap(), 0.4).unwrap();
    let cfg = SolverConfig::default();
    let product = epsilon_continuation(&model, 30.0, &cfg, StageSolver::Product).unwrap();
    let sphere = epsilon_continuation(&model, 30.0, &cfg, StageSolver::Sphere).unwrap();
    assert!(
        (product.u.mass() - 30.0).abs() < 1e-10 * 30.0,
        "mass {}",
        product.u.mass()
    );
    assert!(
        (product.energy - sphere.energy).abs() < 1e-6 * sphere.energy.abs(),
        "{} vs {}",
        product.energy,
        sphere.energy
    );
    assert!((product.mu - sphere.mu).abs() < 1e-4 * sphere.mu.abs());
}
