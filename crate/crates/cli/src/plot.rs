//! Gnuplot-ready text files derived from a completed run directory.
//!
//! From `scan.csv`: `a_curve.dat` (`μ a`), `quotient.dat` (`μ 2a/μ` for
//! `μ > 0`, then after a blank double line the marker row `μ m₀`) and, given a
//! mass, `legendre.dat` (`μ a − μm/2`). From `field.bin`: `profile.dat`, which
//! is `x u(x)` on the grid for `N = 1` and the azimuthal average `r ū(r)` in
//! bins of one grid spacing around the peak for `N = 2`.

use std::fmt::Write as _;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use pohozaev_core::field::read_field;
use pohozaev_core::Field;

use crate::config::Mode;
use crate::run::{write_file, RunError};

/// Writes the plot files for `mode` and returns their paths.
pub fn emit_plot_data(dir: &Path, mode: Mode, dim: usize, m: Option<f64>) -> Result<Vec<PathBuf>, RunError> {
    let needed: &[&str] = if mode.scans() {
        &["scan.csv"]
    } else if mode.solves_field() {
        &["field.bin"]
    } else {
        &[]
    };
    let missing: Vec<&str> = needed.iter().copied().filter(|f| !dir.join(f).exists()).collect();
    if !missing.is_empty() {
        return Err(RunError::Input(format!(
            "plot: missing inputs in {}: {}",
            dir.display(),
            missing.join(", ")
        )));
    }
    let mut written = Vec::new();
    if mode.scans() {
        let pairs = read_scan(&dir.join("scan.csv"))?;
        let mut curve = String::new();
        let mut quotient = String::new();
        let mut best: Option<(f64, f64)> = None;
        for &(mu, a) in &pairs {
            let _ = writeln!(curve, "{mu:e} {a:e}");
            if mu > 0.0 {
                let qv = 2.0 * a / mu;
                let _ = writeln!(quotient, "{mu:e} {qv:e}");
                if best.is_none_or(|b| qv < b.1) {
                    best = Some((mu, qv));
                }
            }
        }
        if let Some((mu, m0)) = best {
            let _ = write!(quotient, "\n\n{mu:e} {m0:e}\n");
        }
        written.push(save(dir, "a_curve.dat", &curve)?);
        written.push(save(dir, "quotient.dat", &quotient)?);
        if let Some(m) = m {
            let mut leg = String::new();
            for &(mu, a) in &pairs {
                let _ = writeln!(leg, "{mu:e} {:e}", a - 0.5 * mu * m);
            }
            written.push(save(dir, "legendre.dat", &leg)?);
        }
    }
    if mode.solves_field() {
        let path = dir.join("field.bin");
        let file = File::open(&path).map_err(|source| RunError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let u = read_field(BufReader::new(file)).map_err(|source| RunError::Core {
            module: "field",
            source,
        })?;
        if u.grid().dim() != dim {
            return Err(RunError::Input(format!(
                "plot: field.bin has N = {}, expected {dim}",
                u.grid().dim()
            )));
        }
        written.push(save(dir, "profile.dat", &profile(&u))?);
    }
    Ok(written)
}

fn save(dir: &Path, name: &str, text: &str) -> Result<PathBuf, RunError> {
    let path = dir.join(name);
    write_file(&path, text)?;
    Ok(path)
}

/// Converged `(μ, a)` rows of a scan CSV.
fn read_scan(path: &Path) -> Result<Vec<(f64, f64)>, RunError> {
    let text = std::fs::read_to_string(path).map_err(|source| RunError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let bad = |i: usize| RunError::Input(format!("plot: malformed row {} in {}", i + 1, path.display()));
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 4 {
            return Err(bad(i));
        }
        let mu: f64 = cols[0].parse().map_err(|_| bad(i))?;
        let a: f64 = cols[1].parse().map_err(|_| bad(i))?;
        if cols[2] == "true" {
            out.push((mu, a));
        }
    }
    Ok(out)
}

fn profile(u: &Field) -> String {
    let g = *u.grid();
    let mut text = String::new();
    if g.dim() == 1 {
        for (j, v) in u.values().iter().enumerate() {
            let _ = writeln!(text, "{:e} {v:e}", g.coordinate(j));
        }
        return text;
    }
    let c = u.centered();
    let h = g.spacing();
    let bins = (g.half_len() / h).floor() as usize + 1;
    let mut acc = vec![(0.0, 0.0, 0usize); bins];
    for (idx, &v) in c.values().iter().enumerate() {
        let r = g.radius(idx);
        let b = (r / h).round() as usize;
        if b < bins {
            acc[b].0 += r;
            acc[b].1 += v;
            acc[b].2 += 1;
        }
    }
    for (r, v, k) in acc.into_iter().filter(|b| b.2 > 0) {
        let _ = writeln!(text, "{:e} {:e}", r / k as f64, v / k as f64);
    }
    text
}
