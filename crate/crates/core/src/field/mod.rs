//! Uniform periodic grids on `[−L, L)^N`, sampled fields, quadrature, and mass
//! projection.

mod io;
mod rearrange;
mod spectral;

pub use io::{read_field, read_field_csv, write_field, write_field_csv};
pub use rearrange::schwarz_rearrange;
pub use spectral::FracLaplacian;

use crate::error::{Error, Result};

/// Uniform periodic grid on `[−L, L)^N` with `n` points per dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    dim: usize,
    half_len: f64,
    n: usize,
}

impl Grid {
    pub fn new(dim: usize, half_len: f64, n: usize) -> Result<Self> {
        if !(dim == 1 || dim == 2) {
            return Err(Error::domain(format!("grid dimension {dim} unsupported (1 or 2)")));
        }
        if !(half_len > 0.0 && half_len.is_finite()) {
            return Err(Error::domain(format!(
                "half box length L = {half_len} must be positive"
            )));
        }
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::domain(format!(
                "points per dimension n = {n} must be a power of two"
            )));
        }
        Ok(Grid { dim, half_len, n })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_len(&self) -> f64 {
        self.half_len
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Total number of samples `n^N`.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_len / self.n as f64
    }

    /// Quadrature weight `h^N`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    pub fn box_measure(&self) -> f64 {
        (2.0 * self.half_len).powi(self.dim as i32)
    }

    pub fn coordinate(&self, j: usize) -> f64 {
        -self.half_len + j as f64 * self.spacing()
    }

    /// Per-dimension indices of a flat row-major index.
    pub fn multi_index(&self, idx: usize) -> [usize; 2] {
        if self.dim == 1 {
            [idx, 0]
        } else {
            [idx / self.n, idx % self.n]
        }
    }

    /// Physical coordinates of a flat index (second entry is zero for `N = 1`).
    pub fn point(&self, idx: usize) -> [f64; 2] {
        let [i, j] = self.multi_index(idx);
        if self.dim == 1 {
            [self.coordinate(i), 0.0]
        } else {
            [self.coordinate(i), self.coordinate(j)]
        }
    }

    pub fn radius(&self, idx: usize) -> f64 {
        let [x, y] = self.point(idx);
        x.hypot(y)
    }

    /// Angular wavenumber `π j / L` of FFT-ordered index `i`, with
    /// `j ∈ {−n/2, …, n/2 − 1}`.
    pub fn wavenumber(&self, i: usize) -> f64 {
        let j = if i < self.n / 2 {
            i as i64
        } else {
            i as i64 - self.n as i64
        };
        std::f64::consts::PI * j as f64 / self.half_len
    }

    /// Rectangle-rule quadrature `h^N Σ samples`.
    pub fn integrate(&self, samples: &[f64]) -> Result<f64> {
        if samples.len() != self.len() {
            return Err(Error::domain(format!(
                "sample length {} does not match grid size {}",
                samples.len(),
                self.len()
            )));
        }
        Ok(self.cell_volume() * samples.iter().sum::<f64>())
    }

    /// Flat indices of the outermost grid shell (first row/column of the periodic box).
    pub fn outer_shell(&self) -> Vec<usize> {
        if self.dim == 1 {
            vec![0, self.n - 1]
        } else {
            let n = self.n;
            (0..self.len())
                .filter(|&idx| {
                    let [i, j] = self.multi_index(idx);
                    i == 0 || j == 0 || i == n - 1 || j == n - 1
                })
                .collect()
        }
    }
}

/// A real function sampled on a [`Grid`], stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::domain(format!(
                "field has {} values, grid expects {}",
                values.len(),
                grid.len()
            )));
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric {
                what: format!("non-finite field value at index {bad}"),
                achieved: values[bad],
            });
        }
        Ok(Field { grid, values })
    }

    pub(crate) fn from_vec_unchecked(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Field { grid, values }
    }

    pub fn zeros(grid: Grid) -> Self {
        Field {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    /// Samples `f` at every grid point; `f` receives `[x, y]` (`y = 0` for `N = 1`).
    pub fn from_fn(grid: Grid, f: impl Fn([f64; 2]) -> f64) -> Self {
        let values = (0..grid.len()).map(|idx| f(grid.point(idx))).collect();
        Field { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scaled(&self, c: f64) -> Field {
        self.map(|v| c * v)
    }

    pub fn integral(&self) -> f64 {
        self.grid.cell_volume() * self.values.iter().sum::<f64>()
    }

    /// `∫ u²`.
    pub fn mass(&self) -> f64 {
        self.grid.cell_volume() * self.values.iter().map(|v| v * v).sum::<f64>()
    }

    /// `∫ u v`.
    pub fn inner(&self, other: &Field) -> f64 {
        self.grid.cell_volume() * self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum::<f64>()
    }

    /// `∫ |u|^p`.
    pub fn lp_power(&self, p: f64) -> f64 {
        self.grid.cell_volume() * self.values.iter().map(|v| v.abs().powf(p)).sum::<f64>()
    }

    /// Discrete L² norm `(∫ u²)^{1/2}`.
    pub fn l2_norm(&self) -> f64 {
        self.mass().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Rescales onto the sphere `∫u² = m`.
    pub fn l2_project(&self, m: f64) -> Result<Field> {
        if !(m > 0.0) {
            return Err(Error::domain(format!("target mass {m} must be positive")));
        }
        let mass = self.mass();
        if mass == 0.0 {
            return Err(Error::degenerate("cannot project the zero field onto an L² sphere"));
        }
        Ok(self.scaled((m / mass).sqrt()))
    }

    /// `max |u|` on the outermost grid shell relative to `max |u|`.
    pub fn outer_shell_ratio(&self) -> f64 {
        let peak = self.max_abs();
        if peak == 0.0 {
            return 0.0;
        }
        let edge = self
            .grid
            .outer_shell()
            .into_iter()
            .fold(0.0_f64, |m, i| m.max(self.values[i].abs()));
        edge / peak
    }

    /// Flat index of the largest `|u|`.
    pub fn peak_index(&self) -> usize {
        self.values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .map(|(i, _)| i)
            .unwrap_or(0)
    }

    /// Periodic shift moving the peak to the box center.
    pub fn centered(&self) -> Field {
        let n = self.grid.n;
        let [pi, pj] = self.grid.multi_index(self.peak_index());
        let c = n / 2;
        let mut out = vec![0.0; self.values.len()];
        for (idx, slot) in out.iter_mut().enumerate() {
            let [i, j] = self.grid.multi_index(idx);
            let si = (i + pi + n - c) % n;
            let src = if self.grid.dim == 1 {
                si
            } else {
                si * n + (j + pj + n - c) % n
            };
            *slot = self.values[src];
        }
        Field {
            grid: self.grid,
            values: out,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_validation() {
        assert!(Grid::new(3, 1.0, 8).is_err());
        assert!(Grid::new(1, 1.0, 12).is_err());
        assert!(Grid::new(1, -1.0, 8).is_err());
        let g = Grid::new(2, 4.0, 16).unwrap();
        assert!((g.spacing() * 16.0 - 8.0).abs() < 1e-15);
        assert_eq!(g.len(), 256);
    }

    #[test]
    fn wavenumbers_are_symmetric_up_to_nyquist() {
        let g = Grid::new(1, 3.0, 8).unwrap();
        let ks: Vec<f64> = (0..8).map(|i| g.wavenumber(i)).collect();
        let pi = std::f64::consts::PI;
        assert_eq!(ks[0], 0.0);
        for j in 1..4 {
            assert!((ks[j] + ks[8 - j]).abs() < 1e-15);
        }
        assert!((ks[4] + 4.0 * pi / 3.0).abs() < 1e-14);
    }

    #[test]
    fn integrate_box_measure_and_zero() {
        let g = Grid::new(1, 8.0, 64).unwrap();
        assert!((g.integrate(&vec![1.0; 64]).unwrap() - 16.0).abs() < 1e-12);
        assert_eq!(g.integrate(&vec![0.0; 64]).unwrap(), 0.0);
        assert!(matches!(g.integrate(&[1.0; 3]), Err(Error::Domain(_))));
    }

    #[test]
    fn integrate_gaussian_is_spectrally_accurate() {
        let g = Grid::new(2, 10.0, 256).unwrap();
        let f = Field::from_fn(g, |[x, y]| (-(x * x + y * y)).exp());
        assert!((f.integral() - std::f64::consts::PI).abs() < 1e-10);
    }

    #[test]
    fn mass_and_projection() {
        let g = Grid::new(2, 2.0, 8).unwrap();
        let c = Field::from_fn(g, |_| 3.0);
        assert!((c.mass() - 9.0 * 16.0).abs() < 1e-12);
        assert_eq!(Field::zeros(g).mass(), 0.0);
        assert!(matches!(Field::zeros(g).l2_project(1.0), Err(Error::Degenerate(_))));

        let u = Field::from_fn(g, |[x, y]| (-(x * x + y * y)).exp() + 0.1);
        let p = u.l2_project(2.5).unwrap();
        assert!((p.mass() - 2.5).abs() < 1e-13);
        let pp = p.l2_project(2.5).unwrap();
        for (a, b) in p.values().iter().zip(pp.values()) {
            assert!((a - b).abs() < 1e-15);
        }
        let four = u.l2_project(4.0).unwrap();
        let one = four.l2_project(1.0).unwrap();
        assert!((one.values()[0] / four.values()[0] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn field_rejects_non_finite() {
        let g = Grid::new(1, 1.0, 4).unwrap();
        assert!(Field::new(g, vec![0.0, f64::NAN, 0.0, 0.0]).is_err());
        assert!(Field::new(g, vec![0.0; 3]).is_err());
    }

    #[test]
    fn centering_moves_peak_to_middle() {
        let g = Grid::new(2, 4.0, 16).unwrap();
        let u = Field::from_fn(g, |[x, y]| (-((x - 1.5).powi(2) + (y + 2.0).powi(2))).exp());
        let c = u.centered();
        assert_eq!(g.multi_index(c.peak_index()), [8, 8]);
        assert!((c.mass() - u.mass()).abs() < 1e-14);
    }
}
