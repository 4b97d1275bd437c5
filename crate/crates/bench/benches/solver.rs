use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use pohozaev_bench::perturbed_log_model;
use pohozaev_core::solvers::{solve_fixed_mu, solve_mass_constrained, solve_product};
use pohozaev_core::{Grid, SolverConfig};

/// Ten iterations of each driver on one continuation stage.
fn solver_steps(c: &mut Criterion) {
    let cfg = SolverConfig {
        max_iters: 10,
        check_box: false,
        ..SolverConfig::default()
    };
    for (name, grid, s) in [
        ("1d_2048", Grid::new(1, 64.0, 2048).unwrap(), 0.5),
        ("2d_128", Grid::new(2, 16.0, 128).unwrap(), 1.0),
    ] {
        let model = perturbed_log_model(grid, s, 1e-2).unwrap();
        c.bench_function(&format!("sphere_flow_10_{name}"), |b| {
            b.iter(|| solve_mass_constrained(black_box(&model), 30.0, &cfg, false).unwrap())
        });
        c.bench_function(&format!("product_10_{name}"), |b| {
            b.iter(|| solve_product(black_box(&model), 30.0, &cfg).unwrap())
        });
        c.bench_function(&format!("fixed_mu_10_{name}"), |b| {
            b.iter(|| solve_fixed_mu(black_box(&model), 1.0, &cfg).unwrap())
        });
    }
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = solver_steps
}
criterion_main!(benches);
