//! Mode dispatch and persistence of run outputs.
//!
//! Files written to the output directory, depending on the mode:
//! `field.bin` and `field.csv` (solved field), `report.csv` (identity audit),
//! `trace.csv` (with tracing on), `scan.csv` (landscape samples),
//! `benchmarks.csv`, `audit.csv`, the plot files of [`crate::plot`], and
//! always `summary.txt`: result keys followed by the resolved configuration.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use pohozaev_core::benchmarks::{run_suite, suite_csv, SuiteConfig};
use pohozaev_core::field::{read_field, read_field_csv, write_field, write_field_csv};
use pohozaev_core::landscape::{compute_m0, default_mu_grid, legendre_kappa, nonexistence_beta_star, scan_a};
use pohozaev_core::solvers::{epsilon_continuation, shift_and_solve, solve_fixed_mu, StageSolver};
use pohozaev_core::{Error, Field, Grid, IdentityReport, Model, SolutionRecord, ThresholdReport, TraceRow};
use thiserror::Error;

use crate::config::{Family, MassSolver, Mode, RunConfig, Spacing};
use crate::plot::emit_plot_data;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("{module}: {source}")]
    Core {
        module: &'static str,
        #[source]
        source: Error,
    },
    #[error("output: cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Input(String),
}

impl RunError {
    /// Non-convergence reported by a solver, as opposed to a hard failure.
    pub fn is_controlled(&self) -> bool {
        fn controlled(e: &Error) -> bool {
            match e {
                Error::NonConvergence(_) => true,
                Error::Stage { source, .. } => controlled(source),
                _ => false,
            }
        }
        matches!(self, RunError::Core { source, .. } if controlled(source))
    }

    pub fn exit_code(&self) -> u8 {
        if self.is_controlled() {
            2
        } else {
            1
        }
    }
}

fn core(module: &'static str) -> impl Fn(Error) -> RunError {
    move |source| RunError::Core { module, source }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Converged,
    NotConverged,
    BenchmarkFailed,
}

impl Status {
    pub fn exit_code(self) -> u8 {
        match self {
            Status::Converged => 0,
            Status::NotConverged => 2,
            Status::BenchmarkFailed => 1,
        }
    }
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<(), RunError> {
    fs::write(path, contents).map_err(|source| RunError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Runs the configured mode and writes its outputs.
pub fn run(cfg: &RunConfig) -> Result<Status, RunError> {
    let out = cfg.output_dir();
    fs::create_dir_all(&out).map_err(io_err(&out))?;
    let mut summary = String::new();
    let _ = writeln!(summary, "mode = \"{}\"", mode_name(cfg.problem.mode));
    let status = match cfg.problem.mode {
        Mode::FixedMu => run_fixed_mu(cfg, &out, &mut summary)?,
        Mode::Mass | Mode::Product => run_mass(cfg, &out, &mut summary)?,
        Mode::Scan | Mode::Legendre => run_scan(cfg, &out, &mut summary)?,
        Mode::Benchmark => run_benchmark(cfg, &out, &mut summary)?,
        Mode::Audit => run_audit(cfg, &out, &mut summary)?,
    };
    let _ = writeln!(summary, "converged = {}", status == Status::Converged);
    summary.push_str("\n# resolved configuration\n[config]\n");
    for line in cfg.resolved_toml().lines() {
        match line.strip_prefix('[') {
            Some(rest) => {
                let _ = writeln!(summary, "[config.{rest}");
            }
            None => {
                let _ = writeln!(summary, "{line}");
            }
        }
    }
    write_file(&out.join("summary.txt"), &summary)?;
    if cfg.problem.mode != Mode::Benchmark {
        emit_plot_data(&out, cfg.problem.mode, cfg.grid.dim, cfg.problem.m)?;
    }
    Ok(status)
}

fn mode_name(mode: Mode) -> &'static str {
    match mode {
        Mode::FixedMu => "fixed_mu",
        Mode::Mass => "mass",
        Mode::Product => "product",
        Mode::Scan => "scan",
        Mode::Legendre => "legendre",
        Mode::Benchmark => "benchmark",
        Mode::Audit => "audit",
    }
}

fn model(cfg: &RunConfig) -> Result<Model, RunError> {
    let g = &cfg.grid;
    let grid = Grid::new(g.dim, g.half_len, g.n).map_err(core("field"))?;
    let spec = cfg.spec().map_err(core("nonlinearity"))?;
    Model::new(spec, grid, g.s).map_err(core("functionals"))
}

fn save_field(out: &Path, u: &Field) -> Result<(), RunError> {
    let bin = out.join("field.bin");
    let f = File::create(&bin).map_err(io_err(&bin))?;
    write_field(BufWriter::new(f), u).map_err(core("field"))?;
    let csv = out.join("field.csv");
    let f = File::create(&csv).map_err(io_err(&csv))?;
    write_field_csv(BufWriter::new(f), u).map_err(core("field"))
}

fn report_csv(r: &IdentityReport) -> String {
    format!("{}\n{}\n", IdentityReport::CSV_HEADER, r.csv_row())
}

fn save_trace(cfg: &RunConfig, out: &Path, rows: &[TraceRow]) -> Result<(), RunError> {
    if !cfg.output.trace {
        return Ok(());
    }
    let mut text = format!("{}\n", TraceRow::CSV_HEADER);
    for r in rows {
        text.push_str(&r.csv_row());
        text.push('\n');
    }
    write_file(&out.join("trace.csv"), &text)
}

fn summarize_report(summary: &mut String, r: &IdentityReport) {
    let _ = writeln!(summary, "m = {:e}", r.mass);
    let _ = writeln!(summary, "mu = {:e}", r.mu);
    let _ = writeln!(summary, "K = {:e}", r.energy);
    let _ = writeln!(summary, "I = {:e}", r.lagrangian);
    let _ = writeln!(summary, "pohozaev_rel = {:e}", r.pohozaev_rel);
    let _ = writeln!(summary, "nehari_rel = {:e}", r.nehari_rel);
    let _ = writeln!(summary, "pde_rel = {:e}", r.pde_rel);
}

fn warnings_line(summary: &mut String, warnings: &[String]) {
    if !warnings.is_empty() {
        let quoted: Vec<String> = warnings.iter().map(|w| format!("{w:?}")).collect();
        let _ = writeln!(summary, "warnings = [{}]", quoted.join(", "));
    }
}

fn run_fixed_mu(cfg: &RunConfig, out: &Path, summary: &mut String) -> Result<Status, RunError> {
    let model = model(cfg)?;
    let mu = cfg.problem.mu.unwrap_or_default();
    let sol = solve_fixed_mu(&model, mu, &cfg.solver_config()).map_err(core("solvers"))?;
    save_field(out, &sol.u)?;
    let report = model
        .identity_audit(mu, &sol.u, sol.u.mass())
        .map_err(core("functionals"))?;
    write_file(&out.join("report.csv"), &report_csv(&report))?;
    save_trace(cfg, out, &sol.trace)?;
    let _ = writeln!(summary, "a = {:e}", sol.a);
    let _ = writeln!(summary, "constraint_residual = {:e}", sol.constraint_residual);
    let _ = writeln!(summary, "outside_guarantee = {}", sol.outside_guarantee);
    let _ = writeln!(summary, "iterations = {}", sol.iterations);
    summarize_report(summary, &report);
    warnings_line(summary, &sol.warnings);
    Ok(if sol.converged {
        Status::Converged
    } else {
        Status::NotConverged
    })
}

fn run_mass(cfg: &RunConfig, out: &Path, summary: &mut String) -> Result<Status, RunError> {
    let model = model(cfg)?;
    let m = cfg.problem.m.unwrap_or_default();
    let stage = match (cfg.problem.mode, cfg.problem.solver) {
        (Mode::Product, _) => StageSolver::Product,
        (_, MassSolver::Ball) => StageSolver::Ball,
        _ => StageSolver::Sphere,
    };
    let sc = cfg.solver_config();
    let rec: SolutionRecord = match cfg.problem.omega {
        Some(omega) => shift_and_solve(&model, m, omega, &sc, stage),
        None => epsilon_continuation(&model, m, &sc, stage),
    }
    .map_err(core("solvers"))?;
    save_field(out, &rec.u)?;
    write_file(&out.join("report.csv"), &report_csv(&rec.report))?;
    save_trace(cfg, out, &rec.trace)?;
    summarize_report(summary, &rec.report);
    let _ = writeln!(summary, "target_m = {m:e}");
    let _ = writeln!(summary, "mu_flow = {:e}", rec.mu_flow);
    let _ = writeln!(summary, "eps_final = {:e}", rec.eps_final);
    let _ = writeln!(summary, "iterations = {}", rec.iterations);
    if let Some(k) = rec.energy_via_shift {
        let _ = writeln!(summary, "K_via_shift = {k:e}");
    }
    warnings_line(summary, &rec.warnings);
    Ok(if rec.converged {
        Status::Converged
    } else {
        Status::NotConverged
    })
}

fn mu_grid(cfg: &RunConfig, model: &Model) -> Result<Vec<f64>, RunError> {
    let p = &cfg.problem;
    match (p.mu_min, p.mu_max, p.mu_points) {
        (Some(lo), Some(hi), Some(k)) => Ok((0..k)
            .map(|i| {
                let f = i as f64 / (k - 1) as f64;
                match p.mu_spacing {
                    Spacing::Log => lo * (hi / lo).powf(f),
                    Spacing::Linear => lo + (hi - lo) * f,
                }
            })
            .collect()),
        _ => default_mu_grid(model.spec()).map_err(core("landscape")),
    }
}

fn run_scan(cfg: &RunConfig, out: &Path, summary: &mut String) -> Result<Status, RunError> {
    let model = model(cfg)?;
    let grid = mu_grid(cfg, &model)?;
    let samples = scan_a(&model, &grid, &cfg.solver_config(), cfg.workers()).map_err(core("landscape"))?;
    write_file(&out.join("scan.csv"), &samples.csv())?;
    let converged = samples.converged.iter().filter(|&&c| c).count();
    let _ = writeln!(summary, "samples = {}", samples.len());
    let _ = writeln!(summary, "converged_samples = {converged}");
    let _ = writeln!(summary, "scan_eps = {:e}", samples.eps);

    let m0 = compute_m0(&samples).ok();
    let legendre = match (cfg.problem.mode, cfg.problem.m) {
        (Mode::Legendre, Some(m)) => Some(legendre_kappa(&samples, m).map_err(core("landscape"))?),
        _ => None,
    };
    let nl = &cfg.nonlinearity;
    let beta_star = match (nl.family, nl.alpha, nl.q) {
        (Family::LogPower, Some(a), Some(q)) => nonexistence_beta_star(a, q).ok(),
        _ => None,
    };
    let report = ThresholdReport {
        m0,
        legendre,
        beta_star,
    };
    summary.push_str(&report.key_values());
    if let Some(m) = cfg.problem.m {
        let _ = writeln!(summary, "m = {m:e}");
    }
    Ok(if converged == samples.len() {
        Status::Converged
    } else if cfg.problem.mode == Mode::Legendre && legendre.is_some() {
        // Isolated failed samples do not invalidate the transform.
        Status::Converged
    } else {
        Status::NotConverged
    })
}

fn run_benchmark(cfg: &RunConfig, out: &Path, summary: &mut String) -> Result<Status, RunError> {
    let rows = run_suite(&SuiteConfig {
        seed: cfg.solver.seed,
        ..SuiteConfig::default()
    })
    .map_err(core("benchmarks"))?;
    write_file(&out.join("benchmarks.csv"), &suite_csv(&rows))?;
    let passed = rows.iter().filter(|r| r.pass).count();
    let _ = writeln!(summary, "benchmarks = {}", rows.len());
    let _ = writeln!(summary, "benchmarks_passed = {passed}");
    Ok(if passed == rows.len() {
        Status::Converged
    } else {
        Status::BenchmarkFailed
    })
}

fn run_audit(cfg: &RunConfig, out: &Path, summary: &mut String) -> Result<Status, RunError> {
    let model = model(cfg)?;
    let path = cfg.resolve(cfg.problem.field.as_deref().unwrap_or(Path::new("")));
    let file = File::open(&path).map_err(io_err(&path))?;
    let u = if path.extension().is_some_and(|e| e == "csv") {
        read_field_csv(file)
    } else {
        read_field(std::io::BufReader::new(file))
    }
    .map_err(core("field"))?;
    if u.grid() != model.grid() {
        return Err(RunError::Input(format!(
            "audit: field {} has grid {:?}, config has {:?}",
            path.display(),
            u.grid(),
            model.grid()
        )));
    }
    let mu = match cfg.problem.mu {
        Some(mu) => mu,
        None => model.mu_from_pohozaev(&u, None).map_err(core("functionals"))?,
    };
    let m = cfg.problem.m.unwrap_or_else(|| u.mass());
    let report = model.identity_audit(mu, &u, m).map_err(core("functionals"))?;
    write_file(&out.join("audit.csv"), &report_csv(&report))?;
    summarize_report(summary, &report);
    Ok(Status::Converged)
}
