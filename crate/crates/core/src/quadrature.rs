//! Adaptive Simpson quadrature for scalar integrands.

use crate::error::{Error, Result};

/// Absolute tolerance used for every primitive computed by quadrature.
pub const QUAD_ABS_TOL: f64 = 1e-10;

const MAX_DEPTH: u32 = 48;

/// Integrates `f` over `[a, b]` (either orientation) to absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::domain("quadrature bounds must be finite"));
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = simpson(a, b, fa, fm, fb);
    let mut worst = 0.0_f64;
    let value = recurse(f, a, b, fa, fm, fb, whole, tol, MAX_DEPTH, &mut worst);
    if !value.is_finite() {
        return Err(Error::Numeric {
            what: format!("non-finite integral over [{a}, {b}]"),
            achieved: f64::INFINITY,
        });
    }
    if worst > tol {
        return Err(Error::Numeric {
            what: format!("adaptive Simpson did not reach tolerance {tol:e} on [{a}, {b}]"),
            achieved: worst,
        });
    }
    Ok(value)
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn recurse<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    worst: &mut f64,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        if depth == 0 {
            *worst = worst.max(delta.abs() / 15.0);
        }
        return left + right + delta / 15.0;
    }
    recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, worst)
        + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, worst)
}
