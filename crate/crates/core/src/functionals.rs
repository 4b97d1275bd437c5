//! Energy `K`, Lagrangian `I^m`, action `J_μ`, the Pohožaev and Nehari
//! functionals, PDE residuals, and the dilation algebra.
//!
//! Under `u ↦ u(·/t)` the Dirichlet energy scales as `t^{N−2s}` while every
//! local integral scales as `t^N`, so dilations are carried out on the three
//! coefficients `(A, ω, |u|₂²)` rather than by resampling the grid.
//!
//! When `N = 2s` the Sobolev exponent `2*_s` is infinite; the Pohožaev
//! functional is then handled through its finite rescaling
//! `P/2*_s = A/2*_s + (μ/2)|u|₂² − ∫G(u)`.

use crate::error::{Error, Result};
use crate::field::{Field, FracLaplacian, Grid};
use crate::nonlinearity::{critical_exponents, inverse_two_star, NonlinearitySpec};
use crate::quadrature::{adaptive_simpson, QUAD_ABS_TOL};

/// A nonlinearity together with the discretized operator `(−Δ)^s`.
#[derive(Debug, Clone)]
pub struct Model {
    spec: NonlinearitySpec,
    op: FracLaplacian,
    theta: f64,
    two_star: f64,
}

/// Integrals of a field needed by every functional.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub dirichlet: f64,
    pub mass: f64,
    pub int_primitive: f64,
    pub int_abs_primitive: f64,
    pub int_gu: f64,
    pub int_abs_gu: f64,
}

impl Model {
    pub fn new(spec: NonlinearitySpec, grid: Grid, s: f64) -> Result<Self> {
        let (_, two_star) = critical_exponents(grid.dim(), s)?;
        let theta = inverse_two_star(grid.dim(), s)?;
        Ok(Model {
            spec,
            op: FracLaplacian::new(grid, s)?,
            theta,
            two_star,
        })
    }

    /// Same grid and order with a different nonlinearity.
    pub fn with_spec(&self, spec: NonlinearitySpec) -> Model {
        Model { spec, ..self.clone() }
    }

    pub fn spec(&self) -> &NonlinearitySpec {
        &self.spec
    }

    pub fn op(&self) -> &FracLaplacian {
        &self.op
    }

    pub fn grid(&self) -> &Grid {
        self.op.grid()
    }

    pub fn dim(&self) -> usize {
        self.grid().dim()
    }

    pub fn order(&self) -> f64 {
        self.op.order()
    }

    /// `1/2*_s`.
    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn two_star(&self) -> f64 {
        self.two_star
    }

    pub fn snapshot(&self, u: &Field) -> Result<Snapshot> {
        let dirichlet = self.op.dirichlet(u);
        let w = self.grid().cell_volume();
        let (mut ig, mut iag, mut igu, mut iagu, mut mass) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for &v in u.values() {
            let big = self.spec.primitive(v);
            let gu = self.spec.g(v) * v;
            ig += big;
            iag += big.abs();
            igu += gu;
            iagu += gu.abs();
            mass += v * v;
        }
        let snap = Snapshot {
            dirichlet,
            mass: w * mass,
            int_primitive: w * ig,
            int_abs_primitive: w * iag,
            int_gu: w * igu,
            int_abs_gu: w * iagu,
        };
        if !(snap.int_primitive.is_finite() && snap.int_gu.is_finite() && snap.dirichlet.is_finite()) {
            return Err(Error::Numeric {
                what: "non-finite integrand in functional evaluation".into(),
                achieved: f64::NAN,
            });
        }
        Ok(snap)
    }

    /// `K(u) = A/2 − ∫G(u)`.
    pub fn energy(&self, u: &Field) -> Result<f64> {
        let s = self.snapshot(u)?;
        Ok(0.5 * s.dirichlet - s.int_primitive)
    }

    /// `J_μ(u) = A/2 + (μ/2)|u|₂² − ∫G(u)`.
    pub fn action(&self, mu: f64, u: &Field) -> Result<f64> {
        let s = self.snapshot(u)?;
        Ok(0.5 * s.dirichlet + 0.5 * mu * s.mass - s.int_primitive)
    }

    /// `I^m(μ, u) = A/2 + (μ/2)(|u|₂² − m) − ∫G(u)`.
    pub fn lagrangian(&self, mu: f64, u: &Field, m: f64) -> Result<f64> {
        if !(m > 0.0) {
            return Err(Error::domain(format!("mass m = {m} must be positive")));
        }
        let s = self.snapshot(u)?;
        Ok(lagrangian_from(&s, mu, m))
    }

    /// `P(μ, u) = A + 2*_s((μ/2)|u|₂² − ∫G(u))`; infinite off the Pohožaev set when `N = 2s`.
    pub fn pohozaev(&self, mu: f64, u: &Field) -> Result<f64> {
        let s = self.snapshot(u)?;
        let local = 0.5 * mu * s.mass - s.int_primitive;
        if self.two_star.is_infinite() {
            return Ok(if local == 0.0 {
                s.dirichlet
            } else {
                local.signum() * f64::INFINITY
            });
        }
        Ok(s.dirichlet + self.two_star * local)
    }

    /// `P(μ, u)/2*_s`, finite for every admissible `(N, s)`.
    pub fn pohozaev_scaled(&self, mu: f64, u: &Field) -> Result<f64> {
        let s = self.snapshot(u)?;
        Ok(self.theta * s.dirichlet + 0.5 * mu * s.mass - s.int_primitive)
    }

    /// Nehari functional `A + μ|u|₂² − ∫g(u)u`.
    pub fn nehari(&self, mu: f64, u: &Field) -> Result<f64> {
        let s = self.snapshot(u)?;
        Ok(s.dirichlet + mu * s.mass - s.int_gu)
    }

    /// `‖(−Δ)^s u + μu − g(u)‖₂ / (‖(−Δ)^s u‖₂ + |μ|‖u‖₂ + ‖g(u)‖₂)`.
    pub fn pde_residual(&self, mu: f64, u: &Field) -> Result<f64> {
        let lu = self.op.apply(u);
        let w = self.grid().cell_volume();
        let (mut r2, mut l2, mut u2, mut g2) = (0.0, 0.0, 0.0, 0.0);
        for (&v, &l) in u.values().iter().zip(lu.values()) {
            let g = self.spec.g(v);
            let r = l + mu * v - g;
            r2 += r * r;
            l2 += l * l;
            u2 += v * v;
            g2 += g * g;
        }
        let norm = (w * l2).sqrt() + mu.abs() * (w * u2).sqrt() + (w * g2).sqrt();
        if norm == 0.0 {
            return Err(Error::degenerate("PDE residual normalizer vanishes"));
        }
        let res = (w * r2).sqrt() / norm;
        if !res.is_finite() {
            return Err(Error::Numeric {
                what: "non-finite PDE residual".into(),
                achieved: res,
            });
        }
        Ok(res)
    }

    pub fn dilation_coeffs(&self, mu: f64, u: &Field) -> Result<DilationCoefficients> {
        let s = self.snapshot(u)?;
        Ok(self.coeffs_from(&s, mu))
    }

    pub fn coeffs_from(&self, s: &Snapshot, mu: f64) -> DilationCoefficients {
        DilationCoefficients {
            dirichlet: s.dirichlet,
            omega: s.int_primitive - 0.5 * mu * s.mass,
            mass: s.mass,
            dim: self.dim(),
            s: self.order(),
        }
    }

    /// Multiplier placing `(μ, u)` on the Pohožaev set:
    /// `μ = (2/M)(∫G(u) − A/2*_s)` with `M = |u|₂²` unless overridden.
    pub fn mu_from_pohozaev(&self, u: &Field, m_override: Option<f64>) -> Result<f64> {
        let s = self.snapshot(u)?;
        self.mu_from_snapshot(&s, m_override)
    }

    pub fn mu_from_snapshot(&self, s: &Snapshot, m_override: Option<f64>) -> Result<f64> {
        if s.mass == 0.0 {
            return Err(Error::degenerate("Lagrange multiplier undefined for the zero field"));
        }
        let denom = match m_override {
            Some(m) if m > 0.0 => m,
            Some(m) => return Err(Error::domain(format!("mass override {m} must be positive"))),
            None => s.mass,
        };
        Ok(2.0 / denom * (s.int_primitive - self.theta * s.dirichlet))
    }

    /// Multiplier from the Nehari pairing, `μ = (∫g(u)u − A)/|u|₂²`.
    pub fn mu_from_nehari(&self, s: &Snapshot) -> Result<f64> {
        if s.mass == 0.0 {
            return Err(Error::degenerate("Lagrange multiplier undefined for the zero field"));
        }
        Ok((s.int_gu - s.dirichlet) / s.mass)
    }

    /// `∫G₋(u)` with `G₋(t) = ∫_0^t g₋`, accumulated by quadrature between
    /// the sorted sample values of each sign.
    pub fn int_g_minus(&self, u: &Field) -> Result<f64> {
        let mut pos: Vec<f64> = u.values().iter().copied().filter(|&v| v > 0.0).collect();
        let mut neg: Vec<f64> = u.values().iter().copied().filter(|&v| v < 0.0).collect();
        pos.sort_by(f64::total_cmp);
        neg.sort_by(|a, b| b.total_cmp(a));
        let f = |t: f64| self.spec.g_minus(t);
        let mut total = 0.0;
        for side in [pos, neg] {
            let (mut prev, mut acc) = (0.0, 0.0);
            let tol = QUAD_ABS_TOL / side.len().max(1) as f64;
            for t in side {
                if t != prev {
                    acc +=
                        adaptive_simpson(&f, prev, t, tol).or_else(|_| adaptive_simpson(&f, prev, t, QUAD_ABS_TOL))?;
                    prev = t;
                }
                total += acc;
            }
        }
        Ok(self.grid().cell_volume() * total)
    }

    pub fn identity_audit(&self, mu: f64, u: &Field, m: f64) -> Result<IdentityReport> {
        let s = self.snapshot(u)?;
        let poh_num = (self.theta * s.dirichlet + 0.5 * mu * s.mass - s.int_primitive).abs();
        let poh_den = self.theta * s.dirichlet + 0.5 * mu.abs() * s.mass + s.int_abs_primitive;
        let neh_num = (s.dirichlet + mu * s.mass - s.int_gu).abs();
        let neh_den = s.dirichlet + mu.abs() * s.mass + s.int_abs_gu;
        if poh_den == 0.0 || neh_den == 0.0 {
            return Err(Error::degenerate("identity residual normalizers vanish"));
        }
        let pde_rel = self.pde_residual(mu, u)?;
        Ok(IdentityReport {
            pohozaev_rel: poh_num / poh_den,
            nehari_rel: neh_num / neh_den,
            pde_rel,
            pohozaev_scale: poh_den,
            nehari_scale: neh_den,
            energy: 0.5 * s.dirichlet - s.int_primitive,
            lagrangian: lagrangian_from(&s, mu, m),
            mass: s.mass,
            mu,
        })
    }
}

fn lagrangian_from(s: &Snapshot, mu: f64, m: f64) -> f64 {
    0.5 * s.dirichlet + 0.5 * mu * (s.mass - m) - s.int_primitive
}

/// `(A, ω, |u|₂²)` with `ω = ∫(G(u) − μu²/2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DilationCoefficients {
    pub dirichlet: f64,
    pub omega: f64,
    pub mass: f64,
    pub dim: usize,
    pub s: f64,
}

impl DilationCoefficients {
    fn theta(&self) -> f64 {
        let n = self.dim as f64;
        (n - 2.0 * self.s) / (2.0 * n)
    }

    /// Coefficients of `u(·/t)`.
    pub fn dilate(&self, t: f64) -> DilationCoefficients {
        let n = self.dim as f64;
        DilationCoefficients {
            dirichlet: t.powf(n - 2.0 * self.s) * self.dirichlet,
            omega: t.powf(n) * self.omega,
            mass: t.powf(n) * self.mass,
            ..*self
        }
    }

    /// `P = A − 2*_s ω`.
    pub fn pohozaev(&self) -> f64 {
        let theta = self.theta();
        if theta == 0.0 {
            return if self.omega == 0.0 {
                self.dirichlet
            } else {
                -self.omega.signum() * f64::INFINITY
            };
        }
        self.dirichlet - self.omega / theta
    }

    /// `P/2*_s = A/2*_s − ω`.
    pub fn pohozaev_scaled(&self) -> f64 {
        self.theta() * self.dirichlet - self.omega
    }

    /// `ω ≤ 0`: no dilation reaches the Pohožaev set.
    pub fn omega_nonpositive(&self) -> bool {
        self.omega <= 0.0
    }

    /// `t₀ = (A/(2*_s ω))^{1/(2s)}`, the dilation with `P(u(·/t₀)) = 0`.
    pub fn pohozaev_dilation(&self) -> Result<f64> {
        if self.omega_nonpositive() {
            return Err(Error::NoDilation(format!("ω = {:e} ≤ 0", self.omega)));
        }
        let theta = self.theta();
        if theta == 0.0 {
            return Err(Error::NoDilation(
                "N = 2s: dilations leave the Dirichlet energy invariant".into(),
            ));
        }
        Ok((theta * self.dirichlet / self.omega).powf(1.0 / (2.0 * self.s)))
    }

    /// `max_{t>0} (t^{N−2s}A/2 − t^N ω) = (s/N) A (A/(2*_s ω))^{(N−2s)/(2s)}`.
    pub fn fibered_energy(&self) -> Result<f64> {
        if self.omega_nonpositive() {
            return Err(Error::NoDilation(format!("ω = {:e} ≤ 0", self.omega)));
        }
        let n = self.dim as f64;
        let theta = self.theta();
        let ratio = if theta == 0.0 {
            1.0
        } else {
            theta * self.dirichlet / self.omega
        };
        Ok(self.s / n * self.dirichlet * ratio.powf((n - 2.0 * self.s) / (2.0 * self.s)))
    }
}

/// Relative identity residuals with the energies and multiplier they refer to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityReport {
    /// `|P/2*_s| / (A/2*_s + |μ||u|₂²/2 + ∫|G(u)|)`.
    pub pohozaev_rel: f64,
    /// `|A + μ|u|₂² − ∫g(u)u| / (A + |μ||u|₂² + ∫|g(u)u|)`.
    pub nehari_rel: f64,
    pub pde_rel: f64,
    pub pohozaev_scale: f64,
    pub nehari_scale: f64,
    pub energy: f64,
    pub lagrangian: f64,
    pub mass: f64,
    pub mu: f64,
}

impl IdentityReport {
    pub const CSV_HEADER: &'static str = "pohozaev_rel,nehari_rel,pde_rel,K,I,mass,mu";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.pohozaev_rel, self.nehari_rel, self.pde_rel, self.energy, self.lagrangian, self.mass, self.mu
        )
    }

    pub fn max_residual(&self) -> f64 {
        self.pohozaev_rel.max(self.nehari_rel).max(self.pde_rel)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(dim: usize, s: f64) -> Model {
        let grid = Grid::new(dim, 4.0, 32).unwrap();
        Model::new(NonlinearitySpec::log(), grid, s).unwrap()
    }

    fn bump(grid: Grid) -> Field {
        Field::from_fn(grid, |[x, y]| 1.7 * (-(x * x + y * y) / 1.5).exp())
    }

    #[test]
    fn zero_field() {
        let m = model(2, 0.5);
        let z = Field::zeros(*m.grid());
        assert_eq!(m.energy(&z).unwrap(), 0.0);
        assert_eq!(m.pohozaev(1.0, &z).unwrap(), 0.0);
        assert_eq!(m.nehari(1.0, &z).unwrap(), 0.0);
        assert!((m.lagrangian(2.0, &z, 3.0).unwrap() + 3.0).abs() < 1e-15);
        assert!(matches!(m.mu_from_pohozaev(&z, None), Err(Error::Degenerate(_))));
        assert!(matches!(m.identity_audit(0.0, &z, 1.0), Err(Error::Degenerate(_))));
        assert!(matches!(m.lagrangian(0.0, &z, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn constant_field_values() {
        let m = model(2, 0.5);
        let v = m.grid().box_measure();
        let one = Field::from_fn(*m.grid(), |_| 1.0);
        assert!((m.energy(&one).unwrap() - v / 2.0).abs() < 1e-12);
        assert!((m.mu_from_pohozaev(&one, None).unwrap() + 1.0).abs() < 1e-12);
        let c = 0.6;
        let cf = Field::from_fn(*m.grid(), |_| c);
        let g = m.spec().primitive(c);
        let expect_p = m.two_star() * v * (0.15 * c * c - g);
        assert!((m.pohozaev(0.3, &cf).unwrap() - expect_p).abs() < 1e-10 * expect_p.abs());
        let expect_r = v * (0.3 * c * c - m.spec().g(c) * c);
        assert!((m.nehari(0.3, &cf).unwrap() - expect_r).abs() < 1e-10 * expect_r.abs());
    }

    #[test]
    fn algebraic_relations_between_functionals() {
        let m = model(2, 0.7);
        let u = bump(*m.grid());
        let mu = 0.37;
        let mass = 2.9;
        let k = m.energy(&u).unwrap();
        let j = m.action(mu, &u).unwrap();
        let s = m.snapshot(&u).unwrap();
        assert!((k - (j - 0.5 * mu * s.mass)).abs() < 1e-12);
        let i = m.lagrangian(mu, &u, mass).unwrap();
        let p = m.pohozaev(mu, &u).unwrap();
        let lhs = i - p / m.two_star();
        let rhs = s.dirichlet * (0.5 - m.theta()) - 0.5 * mu * mass;
        assert!((lhs - rhs).abs() < 1e-12 * rhs.abs().max(1.0));
        let i2 = m.lagrangian(mu + 1.5, &u, mass).unwrap();
        assert!((i2 - i - 1.5 * (s.mass - mass) / 2.0).abs() < 1e-12);
        let on_sphere = u.l2_project(mass).unwrap();
        assert!((m.lagrangian(mu, &on_sphere, mass).unwrap() - m.energy(&on_sphere).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn pohozaev_multiplier_zeroes_pohozaev() {
        let m = model(2, 0.6);
        let u = bump(*m.grid());
        let mu = m.mu_from_pohozaev(&u, None).unwrap();
        assert!(m.pohozaev(mu, &u).unwrap().abs() < 1e-12);
        let mass = 3.3;
        let s = m.snapshot(&u).unwrap();
        let i = m.lagrangian(mu, &u, mass).unwrap();
        let expect = 0.6 / 2.0 * s.dirichlet - 0.5 * mu * mass;
        assert!((i - expect).abs() < 1e-12);
        assert!(m.pohozaev(mu + 0.1, &u).unwrap() > m.pohozaev(mu, &u).unwrap());
    }

    #[test]
    fn eigenmode_with_zero_nonlinearity_has_zero_residual() {
        let grid = Grid::new(1, 3.0, 32).unwrap();
        let zero = NonlinearitySpec::custom("zero", |_| 0.0, Some(std::sync::Arc::new(|_| 0.0)));
        let m = Model::new(zero, grid, 0.4).unwrap();
        let k = 2.0 * std::f64::consts::PI / 3.0;
        let u = Field::from_fn(grid, |[x, _]| (k * x).cos());
        let r = m.pde_residual(-k.powf(0.8), &u).unwrap();
        assert!(r < 1e-12, "{r}");
        let noisy = Field::from_fn(grid, |[x, _]| (k * x).cos() + 0.1 * (3.0 * x).sin().powi(3));
        assert!(m.pde_residual(1.0, &noisy).unwrap() > 0.0);
    }

    #[test]
    fn dilation_exponents() {
        let c = DilationCoefficients {
            dirichlet: 2.0,
            omega: 0.5,
            mass: 1.0,
            dim: 2,
            s: 0.5,
        };
        let theta = 0.25;
        let at_p = DilationCoefficients {
            dirichlet: c.omega / theta,
            ..c
        };
        assert!((at_p.pohozaev_dilation().unwrap() - 1.0).abs() < 1e-15);
        assert!((at_p.fibered_energy().unwrap() - 0.25 * at_p.dirichlet).abs() < 1e-15);
        let twice = DilationCoefficients {
            dirichlet: 2f64.powf(1.0) * c.omega / theta,
            ..c
        };
        assert!((twice.pohozaev_dilation().unwrap() - 2.0).abs() < 1e-14);
        let t0 = c.pohozaev_dilation().unwrap();
        assert!(c.dilate(t0).pohozaev().abs() < 1e-12);
        let neg = DilationCoefficients { omega: -0.1, ..c };
        assert!(neg.omega_nonpositive());
        assert!(matches!(neg.pohozaev_dilation(), Err(Error::NoDilation(_))));
        assert!(matches!(neg.fibered_energy(), Err(Error::NoDilation(_))));
    }
}
