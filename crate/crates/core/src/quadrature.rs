//! Adaptive Simpson quadrature.

use crate::error::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-12;
const MAX_DEPTH: u32 = 48;

/// `int_a^b f` to absolute tolerance `tol` (Richardson-corrected adaptive
/// Simpson). Fails with `QuadratureFailure` when the recursion depth runs out
/// or the integrand is not finite.
pub fn adaptive_simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let value = recurse(&f, a, b, fa, fm, fb, whole, tol, MAX_DEPTH)
        .ok_or(Error::QuadratureFailure { a, b })?;
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::QuadratureFailure { a, b })
    }
}

#[allow(clippy::too_many_arguments)]
fn recurse(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Option<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let diff = left + right - whole;
    if !diff.is_finite() {
        return None;
    }
    if diff.abs() <= 15.0 * tol {
        return Some(left + right + diff / 15.0);
    }
    if depth == 0 {
        return None;
    }
    let l = recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?;
    let r = recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?;
    Some(l + r)
}
