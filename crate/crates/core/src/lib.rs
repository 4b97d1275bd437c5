//! Normalized solutions `(μ, u)` of the fractional Schrödinger equation
//!
//! ```text
//! (−Δ)^s u + μ u = g(u)  in ℝ^N,    ∫ u² = m,
//! ```
//!
//! for sublinear nonlinearities of logarithmic type, computed on a periodic
//! Fourier grid. The crate provides the nonlinearity families and their
//! ε-perturbation, spectral fields, the energy/Lagrangian/Pohožaev
//! functionals with their dilation algebra, four minimization drivers, the
//! `μ ↦ a(μ)` landscape with its Legendre transform, and closed-form
//! benchmarks.

pub mod benchmarks;
pub mod error;
pub mod field;
pub mod functionals;
pub mod landscape;
pub mod nonlinearity;
pub mod quadrature;
pub mod solvers;

pub use error::{Error, Result};
pub use field::{Field, FracLaplacian, Grid};
pub use functionals::{DilationCoefficients, IdentityReport, Model};
pub use landscape::{LandscapeSamples, LegendreValue, MassThreshold, ThresholdReport};
pub use nonlinearity::{critical_exponents, inverse_two_star, mu_bar0, MuBarScan, NonlinearitySpec, SignSplit};
pub use solvers::{Init, SolutionRecord, SolverConfig, TraceRow};
