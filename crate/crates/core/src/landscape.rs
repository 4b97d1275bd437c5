//! The frequency landscape `μ ↦ a(μ)`, the mass threshold `m₀`, the
//! Legendre-type value `b^m = inf_μ (a(μ) − μm/2)`, and the nonexistence
//! threshold for the log-plus-power family.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::functionals::Model;
use crate::nonlinearity::{golden_max, log_space, mu_bar0, MuBarScan, NonlinearitySpec};
use crate::solvers::{solve_fixed_mu, SolverConfig};

/// Samples of `a(μ)` on a sorted frequency grid.
///
/// Failed solves keep their slot with `a = +∞` and `converged = false`; they
/// are never interpolated.
#[derive(Debug, Clone, PartialEq)]
pub struct LandscapeSamples {
    pub mu_values: Vec<f64>,
    pub a_values: Vec<f64>,
    /// Perturbation level of the scanned spec, 0 when unperturbed.
    pub eps: f64,
    pub converged: Vec<bool>,
    pub iterations: Vec<usize>,
    /// Error message of each failed sample.
    pub failures: Vec<Option<String>>,
}

impl LandscapeSamples {
    pub const CSV_HEADER: &'static str = "mu,a,converged,iters";

    /// Builds samples from explicit values, all marked converged. Useful for
    /// feeding externally computed `a(μ)` into the threshold routines.
    pub fn from_values(mu_values: Vec<f64>, a_values: Vec<f64>) -> Result<Self> {
        if mu_values.len() != a_values.len() {
            return Err(Error::domain("μ and a arrays differ in length"));
        }
        check_sorted(&mu_values)?;
        let n = mu_values.len();
        Ok(LandscapeSamples {
            mu_values,
            a_values,
            eps: 0.0,
            converged: vec![true; n],
            iterations: vec![0; n],
            failures: vec![None; n],
        })
    }

    pub fn len(&self) -> usize {
        self.mu_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu_values.is_empty()
    }

    /// `(μ, a)` pairs of converged samples, in grid order.
    pub fn converged_pairs(&self) -> impl Iterator<Item = (usize, f64, f64)> + '_ {
        (0..self.len())
            .filter(|&i| self.converged[i] && self.a_values[i].is_finite())
            .map(|i| (i, self.mu_values[i], self.a_values[i]))
    }

    /// Indices `i` of converged positive-μ samples whose successor among the
    /// converged positive-μ samples drops below `a_i(1 − rel_tol)`.
    pub fn monotonicity_violations(&self, rel_tol: f64) -> Vec<usize> {
        let pos: Vec<(usize, f64, f64)> = self.converged_pairs().filter(|&(_, mu, _)| mu > 0.0).collect();
        pos.windows(2)
            .filter(|w| w[1].2 < w[0].2 - rel_tol * w[0].2.abs())
            .map(|w| w[0].0)
            .collect()
    }

    pub fn csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for i in 0..self.len() {
            let _ = writeln!(
                out,
                "{:.17e},{:.17e},{},{}",
                self.mu_values[i], self.a_values[i], self.converged[i], self.iterations[i]
            );
        }
        out
    }
}

/// Upper-biased estimate of `m₀ = inf_{μ>0} 2a(μ)/μ`: the minimum over the
/// converged samples, each of which overestimates `a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassThreshold {
    pub m0: f64,
    pub mu_at_m0: f64,
    /// Always true for sample-based estimates: the true threshold can only be lower.
    pub upper_bound_only: bool,
}

/// `b^m = min_μ (a(μ) − μm/2)` over the samples and its argmin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LegendreValue {
    pub b: f64,
    pub mu_star: f64,
    /// Grid index of the discrete argmin.
    pub index: usize,
    /// Whether the parabolic refinement through the neighbours was applied.
    pub refined: bool,
}

/// Flat key-value threshold report.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ThresholdReport {
    pub m0: Option<MassThreshold>,
    pub legendre: Option<LegendreValue>,
    pub beta_star: Option<f64>,
}

impl ThresholdReport {
    pub fn key_values(&self) -> String {
        let mut out = String::new();
        if let Some(t) = self.m0 {
            let _ = writeln!(out, "m0 = {:.12e}", t.m0);
            let _ = writeln!(out, "mu_at_m0 = {:.12e}", t.mu_at_m0);
            let _ = writeln!(out, "m0_upper_bound_only = {}", t.upper_bound_only);
        }
        if let Some(l) = self.legendre {
            let _ = writeln!(out, "b_m = {:.12e}", l.b);
            let _ = writeln!(out, "mu_star = {:.12e}", l.mu_star);
        }
        if let Some(b) = self.beta_star {
            let _ = writeln!(out, "beta_star = {b:.12e}");
        }
        out
    }
}

/// Default frequency grid: 24 log-spaced values per decade over `[1e−3, 1e3]`,
/// clipped to `μ < μ̄₀`.
pub fn default_mu_grid(spec: &NonlinearitySpec) -> Result<Vec<f64>> {
    let ceiling = mu_bar0(spec, MuBarScan::default())?;
    let grid: Vec<f64> = log_space(1e-3, 1e3, 6 * 24 + 1).filter(|&mu| mu < ceiling).collect();
    if grid.is_empty() {
        return Err(Error::domain(format!(
            "μ̄₀ = {ceiling} leaves no positive frequencies to scan"
        )));
    }
    Ok(grid)
}

/// Runs [`solve_fixed_mu`] at every grid frequency on a pool of `workers`
/// threads (0 picks the rayon default). Output order follows `mu_grid`.
pub fn scan_a(model: &Model, mu_grid: &[f64], config: &SolverConfig, workers: usize) -> Result<LandscapeSamples> {
    if mu_grid.is_empty() {
        return Err(Error::domain("empty μ grid"));
    }
    check_sorted(mu_grid)?;
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Landscape(format!("cannot build worker pool: {e}")))?;
    let results: Vec<_> = pool.install(|| {
        mu_grid
            .par_iter()
            .map(|&mu| solve_fixed_mu(model, mu, config))
            .collect()
    });

    let n = mu_grid.len();
    let mut samples = LandscapeSamples {
        mu_values: mu_grid.to_vec(),
        a_values: vec![f64::INFINITY; n],
        eps: model.spec().epsilon().unwrap_or(0.0),
        converged: vec![false; n],
        iterations: vec![0; n],
        failures: vec![None; n],
    };
    for (i, res) in results.into_iter().enumerate() {
        match res {
            Ok(sol) => {
                samples.iterations[i] = sol.iterations;
                samples.converged[i] = sol.converged;
                samples.a_values[i] = sol.a;
                if !sol.converged {
                    samples.failures[i] = Some("did not converge".into());
                }
            }
            Err(e) => samples.failures[i] = Some(e.to_string()),
        }
    }
    if !samples.converged.iter().any(|&c| c) {
        let first = samples.failures.iter().flatten().next().cloned().unwrap_or_default();
        return Err(Error::Landscape(format!(
            "all {n} samples failed; first failure: {first}"
        )));
    }
    Ok(samples)
}

/// `m₀ ≈ min 2a(μ)/μ` over converged samples with `μ > 0`.
pub fn compute_m0(samples: &LandscapeSamples) -> Result<MassThreshold> {
    samples
        .converged_pairs()
        .filter(|&(_, mu, _)| mu > 0.0)
        .map(|(_, mu, a)| (2.0 * a / mu, mu))
        .min_by(|x, y| x.0.total_cmp(&y.0))
        .map(|(m0, mu)| MassThreshold {
            m0,
            mu_at_m0: mu,
            upper_bound_only: true,
        })
        .ok_or_else(|| Error::domain("no converged sample with μ > 0"))
}

/// `b^m` and its argmin over converged samples, ties broken toward smaller μ.
/// An interior discrete minimum is refined by the parabola through it and its
/// converged neighbours when that parabola is convex and its vertex lies
/// between them.
pub fn legendre_kappa(samples: &LandscapeSamples, m: f64) -> Result<LegendreValue> {
    if !m.is_finite() {
        return Err(Error::domain(format!("mass m = {m} must be finite")));
    }
    let pts: Vec<(usize, f64, f64)> = samples
        .converged_pairs()
        .map(|(i, mu, a)| (i, mu, a - 0.5 * mu * m))
        .collect();
    if pts.is_empty() {
        return Err(Error::domain("no converged samples"));
    }
    let mut k = 0;
    for (j, p) in pts.iter().enumerate() {
        if p.2 < pts[k].2 {
            k = j;
        }
    }
    let (index, mu_k, b_k) = pts[k];
    let discrete = LegendreValue {
        b: b_k,
        mu_star: mu_k,
        index,
        refined: false,
    };
    if k == 0 || k + 1 == pts.len() {
        return Ok(discrete);
    }
    let (x0, y0) = (pts[k - 1].1, pts[k - 1].2);
    let (x1, y1) = (mu_k, b_k);
    let (x2, y2) = (pts[k + 1].1, pts[k + 1].2);
    // Newton form: p(x) = y0 + d1(x − x0) + d2(x − x0)(x − x1).
    let d1 = (y1 - y0) / (x1 - x0);
    let d2 = ((y2 - y1) / (x2 - x1) - d1) / (x2 - x0);
    if !(d2 > 0.0) {
        return Ok(discrete);
    }
    let xv = 0.5 * (x0 + x1) - d1 / (2.0 * d2);
    if !(xv > x0 && xv < x2) {
        return Ok(discrete);
    }
    let yv = y0 + d1 * (xv - x0) + d2 * (xv - x0) * (xv - x1);
    Ok(LegendreValue {
        b: yv.min(b_k),
        mu_star: if yv <= b_k { xv } else { mu_k },
        index,
        refined: yv <= b_k,
    })
}

/// `β* = −α(q+1)/(q−1)·e^{−(q+1)/2}`: for `g(t) = α t log t² + β|t|^{q−1}t`,
/// `max G ≤ 0` exactly when `β ≤ β*`.
pub fn nonexistence_beta_star(alpha: f64, q: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::domain(format!("α = {alpha} must be positive")));
    }
    if !(q > 1.0 && q.is_finite()) {
        return Err(Error::domain(format!("q = {q} must exceed 1")));
    }
    Ok(-alpha * (q + 1.0) / (q - 1.0) * (-(q + 1.0) / 2.0).exp())
}

/// `max_{t ∈ [t_min, t_max]} G(±t)` by a log-spaced scan refined with golden
/// section around the best sample. Returns `(t_argmax, max)`.
pub fn max_primitive(spec: &NonlinearitySpec, t_min: f64, t_max: f64, n: usize) -> Result<(f64, f64)> {
    if !(t_min > 0.0 && t_max > t_min) || n < 3 {
        return Err(Error::domain("invalid t scan range"));
    }
    let ts: Vec<f64> = log_space(t_min, t_max, n).collect();
    let mut best = (f64::NAN, f64::NEG_INFINITY);
    for sign in [1.0, -1.0] {
        let vals: Vec<f64> = ts.iter().map(|&t| spec.primitive(sign * t)).collect();
        let Some((i, _)) = vals
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_finite())
            .max_by(|a, b| a.1.total_cmp(b.1))
        else {
            continue;
        };
        let lo = ts[i.saturating_sub(1)].ln();
        let hi = ts[(i + 1).min(n - 1)].ln();
        let f = |lt: f64| spec.primitive(sign * lt.exp());
        let lt = golden_max(f, lo, hi, 1e-12);
        let (t, v) = [(lt.exp(), f(lt)), (ts[i], vals[i])]
            .into_iter()
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .expect("two candidates");
        if v > best.1 {
            best = (sign * t, v);
        }
    }
    if !best.1.is_finite() {
        return Err(Error::Numeric {
            what: "G is non-finite on the whole scan".into(),
            achieved: best.1,
        });
    }
    Ok(best)
}

fn check_sorted(mu: &[f64]) -> Result<()> {
    if mu.iter().any(|m| !m.is_finite()) {
        return Err(Error::domain("μ grid contains non-finite values"));
    }
    if mu.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::domain("μ grid must be strictly increasing"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Grid;

    #[test]
    fn single_quotient_threshold() {
        let s = LandscapeSamples::from_values(vec![1.0], vec![2.0]).unwrap();
        let t = compute_m0(&s).unwrap();
        assert_eq!(t.m0, 4.0);
        assert_eq!(t.mu_at_m0, 1.0);
        assert!(t.upper_bound_only);
    }

    #[test]
    fn adding_samples_never_raises_m0() {
        let base = LandscapeSamples::from_values(vec![1.0, 2.0], vec![2.0, 5.0]).unwrap();
        let more = LandscapeSamples::from_values(vec![1.0, 1.5, 2.0], vec![2.0, 1.0, 5.0]).unwrap();
        assert!(compute_m0(&more).unwrap().m0 <= compute_m0(&base).unwrap().m0);
    }

    #[test]
    fn m0_needs_positive_frequency() {
        let s = LandscapeSamples::from_values(vec![-1.0], vec![2.0]).unwrap();
        assert!(matches!(compute_m0(&s), Err(Error::Domain(_))));
    }

    #[test]
    fn legendre_at_zero_mass_is_min_a() {
        let s = LandscapeSamples::from_values(vec![0.5, 1.0, 2.0], vec![3.0, 1.0, 2.0]).unwrap();
        let l = legendre_kappa(&s, 0.0).unwrap();
        assert!(l.b <= 1.0 && l.b >= 0.0);
    }

    #[test]
    fn legendre_refines_exact_parabola() {
        // a(μ) − μ/2 = (μ − 1.3)² − 2 sampled off-center.
        let mu: Vec<f64> = vec![0.4, 0.9, 1.5, 2.2];
        let a: Vec<f64> = mu.iter().map(|&x| (x - 1.3f64).powi(2) - 2.0 + 0.5 * x).collect();
        let l = legendre_kappa(&LandscapeSamples::from_values(mu, a).unwrap(), 1.0).unwrap();
        assert!(l.refined);
        assert!((l.mu_star - 1.3).abs() < 1e-12);
        assert!((l.b + 2.0).abs() < 1e-12);
    }

    #[test]
    fn legendre_ties_prefer_smaller_mu() {
        let s = LandscapeSamples::from_values(vec![1.0, 2.0], vec![1.0, 1.5]).unwrap();
        let l = legendre_kappa(&s, 0.5).unwrap();
        assert_eq!(l.mu_star, 1.0);
        assert_eq!(l.index, 0);
    }

    #[test]
    fn exponential_landscape_legendre() {
        // a = Ce^μ: b = (m/2)(1 − μ*), μ* = ln(m/2C).
        let c = 2.0;
        let m = 40.0;
        let mu: Vec<f64> = (0..200).map(|i| 0.02 * i as f64 + 0.01).collect();
        let a = mu.iter().map(|&x| c * f64::exp(x)).collect();
        let l = legendre_kappa(&LandscapeSamples::from_values(mu, a).unwrap(), m).unwrap();
        let mu_star = (m / (2.0 * c)).ln();
        assert!((l.mu_star - mu_star).abs() < 1e-4);
        assert!((l.b - 0.5 * m * (1.0 - mu_star)).abs() < 1e-4);
    }

    #[test]
    fn beta_star_values() {
        assert!((nonexistence_beta_star(1.0, 3.0).unwrap() + 2.0 * (-2.0f64).exp()).abs() < 1e-15);
        assert!((nonexistence_beta_star(1.0, 3.0).unwrap() + 0.27067).abs() < 1e-5);
        assert!(nonexistence_beta_star(1.0, 1.0 + 1e-9).unwrap() < -1e8);
        assert!(nonexistence_beta_star(1.0, 1.0).is_err());
        assert!(nonexistence_beta_star(0.0, 2.0).is_err());
    }

    #[test]
    fn max_g_sign_flips_at_beta_star() {
        for (alpha, q) in [(1.0, 2.0), (1.0, 3.0), (2.0, 2.5)] {
            let bs = nonexistence_beta_star(alpha, q).unwrap();
            for (beta, positive) in [(bs - 1e-3, false), (bs + 1e-3, true)] {
                let spec = NonlinearitySpec::log_power(alpha, beta, q).unwrap();
                let (_, max) = max_primitive(&spec, 1e-6, 1e3, 4000).unwrap();
                assert_eq!(max > 0.0, positive, "α {alpha} q {q} β {beta} max {max}");
            }
        }
    }

    #[test]
    fn monotonicity_flags() {
        let s = LandscapeSamples::from_values(vec![-1.0, 0.5, 1.0, 2.0], vec![9.0, 1.0, 0.99, 2.0]).unwrap();
        assert_eq!(s.monotonicity_violations(1e-3), vec![1]);
        assert!(s.monotonicity_violations(0.02).is_empty());
    }

    #[test]
    fn rejects_unsorted_grid() {
        let g = Grid::new(1, 8.0, 64).unwrap();
        let model = Model::new(NonlinearitySpec::log(), g, 0.5).unwrap();
        assert!(scan_a(&model, &[1.0, 0.5], &SolverConfig::default(), 1).is_err());
        assert!(scan_a(&model, &[], &SolverConfig::default(), 1).is_err());
    }

    #[test]
    fn default_grid_is_clipped_and_sorted() {
        let grid = default_mu_grid(&NonlinearitySpec::log()).unwrap();
        assert_eq!(grid.len(), 145);
        assert!(grid.windows(2).all(|w| w[1] > w[0]));
        let csv = LandscapeSamples::from_values(vec![1.0], vec![2.0]).unwrap().csv();
        assert!(csv.starts_with("mu,a,converged,iters\n1.0"));
    }
}
