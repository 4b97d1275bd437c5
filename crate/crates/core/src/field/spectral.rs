use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{Field, Grid};
use crate::error::{Error, Result};

/// Fourier-multiplier fractional Laplacian `(−Δ)^s` on a periodic grid.
///
/// The discrete transform is normalized as `û_k = (h/n)^{N/2} Σ_j u_j e^{−ik·x_j}`
/// so that `Σ_k |û_k|² = h^N Σ_j u_j²` reproduces `∫u²`. The Nyquist mode
/// keeps its multiplier `|k_Nyq|^{2s}`.
#[derive(Clone)]
pub struct FracLaplacian {
    grid: Grid,
    s: f64,
    symbol: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for FracLaplacian {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FracLaplacian")
            .field("grid", &self.grid)
            .field("s", &self.s)
            .finish()
    }
}

impl FracLaplacian {
    pub fn new(grid: Grid, s: f64) -> Result<Self> {
        if !(s > 0.0 && s <= 1.0) {
            return Err(Error::domain(format!("fractional order s = {s} must lie in (0, 1]")));
        }
        let n = grid.n();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let symbol = (0..grid.len())
            .map(|idx| {
                let [i, j] = grid.multi_index(idx);
                let k2 = if grid.dim() == 1 {
                    grid.wavenumber(i).powi(2)
                } else {
                    grid.wavenumber(i).powi(2) + grid.wavenumber(j).powi(2)
                };
                k2.powf(s)
            })
            .collect();
        Ok(FracLaplacian {
            grid,
            s,
            symbol,
            forward,
            inverse,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn order(&self) -> f64 {
        self.s
    }

    /// Multiplier `|k|^{2s}` in FFT order.
    pub fn symbol(&self) -> &[f64] {
        &self.symbol
    }

    /// Smallest nonzero multiplier `|k_min|^{2s}`.
    pub fn lowest_nonzero_symbol(&self) -> f64 {
        (std::f64::consts::PI / self.grid.half_len()).powf(2.0 * self.s)
    }

    fn transform(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.grid.n();
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        plan.process_with_scratch(data, &mut scratch);
        if self.grid.dim() == 2 {
            transpose(data, n);
            plan.process_with_scratch(data, &mut scratch);
            transpose(data, n);
        }
    }

    /// Unnormalized DFT of the samples.
    pub(crate) fn forward(&self, values: &[f64]) -> Vec<Complex64> {
        let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut data, &self.forward);
        data
    }

    /// Inverse DFT including the `1/n^N` factor; returns the real part.
    pub(crate) fn inverse_real(&self, mut data: Vec<Complex64>) -> Vec<f64> {
        self.transform(&mut data, &self.inverse);
        let scale = 1.0 / self.grid.len() as f64;
        data.into_iter().map(|c| c.re * scale).collect()
    }

    /// Factor converting `Σ |U_k|²` of the unnormalized DFT into `Σ |û_k|²`.
    fn parseval_weight(&self) -> f64 {
        self.grid.cell_volume() / self.grid.len() as f64
    }

    /// Fractional Dirichlet energy `A = |(−Δ)^{s/2}u|₂² = Σ_k |k|^{2s}|û_k|²`.
    pub fn dirichlet(&self, u: &Field) -> f64 {
        let spec = self.forward(u.values());
        self.parseval_weight()
            * spec
                .iter()
                .zip(&self.symbol)
                .map(|(c, w)| w * c.norm_sqr())
                .sum::<f64>()
    }

    /// Mass computed on the Fourier side, `Σ_k |û_k|²`.
    pub fn spectral_mass(&self, u: &Field) -> f64 {
        let spec = self.forward(u.values());
        self.parseval_weight() * spec.iter().map(|c| c.norm_sqr()).sum::<f64>()
    }

    /// `(−Δ)^s u`.
    pub fn apply(&self, u: &Field) -> Field {
        self.dirichlet_and_apply(u).1
    }

    /// `A(u)` and `(−Δ)^s u` sharing one forward transform.
    pub fn dirichlet_and_apply(&self, u: &Field) -> (f64, Field) {
        let mut spec = self.forward(u.values());
        let mut a = 0.0;
        for (c, w) in spec.iter_mut().zip(&self.symbol) {
            a += w * c.norm_sqr();
            *c *= *w;
        }
        let lu = self.inverse_real(spec);
        (self.parseval_weight() * a, Field::from_vec_unchecked(self.grid, lu))
    }

    /// Applies the multiplier `f(|k|^{2s})` to `u`.
    pub fn apply_multiplier(&self, u: &Field, f: impl Fn(f64) -> f64) -> Field {
        let mut spec = self.forward(u.values());
        for (c, &w) in spec.iter_mut().zip(&self.symbol) {
            *c *= f(w);
        }
        Field::from_vec_unchecked(self.grid, self.inverse_real(spec))
    }

    /// Resolves `(a + b(−Δ)^s)^{-1} rhs`; requires `a + b|k|^{2s} > 0` on every mode.
    pub fn solve_shifted(&self, rhs: &Field, a: f64, b: f64) -> Field {
        self.apply_multiplier(rhs, |w| 1.0 / (a + b * w))
    }

    /// Samples `u(·/t)` by evaluating the trigonometric interpolant of `u`
    /// at the contracted points, one axis at a time (`O(n^{N+1})`).
    ///
    /// Exact for band-limited periodic data. For `t > 1` the core is stretched
    /// toward the box edge, and for `t ≤ 1/2` the periodic image at distance
    /// `2L` lands inside the box.
    pub fn dilate(&self, u: &Field, t: f64) -> Result<Field> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::domain(format!(
                "dilation factor t = {t} must be positive and finite"
            )));
        }
        let grid = self.grid;
        let n = grid.n();
        let phases: Vec<Complex64> = (0..n)
            .map(|j| {
                let y = grid.coordinate(j) / t + grid.half_len();
                Complex64::from_polar(1.0, std::f64::consts::PI * y / grid.half_len())
            })
            .collect();
        let coef = self.forward(u.values());
        let scale = 1.0 / grid.len() as f64;
        let values = if grid.dim() == 1 {
            phases.iter().map(|&z| scale * trig_eval(&coef, z).re).collect()
        } else {
            // Along the inner axis for every outer wavenumber, then along the outer axis.
            let mut inner = vec![Complex64::new(0.0, 0.0); n * n];
            let mut column = vec![Complex64::new(0.0, 0.0); n];
            for k1 in 0..n {
                let row = &coef[k1 * n..(k1 + 1) * n];
                for (j2, &z) in phases.iter().enumerate() {
                    inner[k1 * n + j2] = trig_eval(row, z);
                }
            }
            let mut out = vec![0.0; n * n];
            for j2 in 0..n {
                for k1 in 0..n {
                    column[k1] = inner[k1 * n + j2];
                }
                for (j1, &z) in phases.iter().enumerate() {
                    out[j1 * n + j2] = scale * trig_eval(&column, z).re;
                }
            }
            out
        };
        Ok(Field::from_vec_unchecked(grid, values))
    }
}

/// `Σ_k c_k z^{k}` over signed FFT-ordered indices, with the Nyquist
/// coefficient split evenly between `±n/2` so real data stays real.
fn trig_eval(coef: &[Complex64], z: Complex64) -> Complex64 {
    let n = coef.len();
    let half = n / 2;
    let zc = z.conj();
    let mut acc = coef[0];
    let (mut p, mut q) = (Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0));
    for k in 1..half {
        p *= z;
        q *= zc;
        acc += coef[k] * p + coef[n - k] * q;
    }
    if n.is_multiple_of(2) && n > 1 {
        p *= z;
        q *= zc;
        acc += coef[half] * 0.5 * (p + q);
    } else if n > 1 {
        p *= z;
        q *= zc;
        acc += coef[half] * p + coef[n - half] * q;
    }
    acc
}

fn transpose(data: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            data.swap(i * n + j, j * n + i);
        }
    }
}
