//! Scalar root finding on bracketed monotone functions.

use crate::error::{OmtError, Result};

const MAX_ITER: usize = 400;

/// Bisection for a root of `g` on `[lo, hi]`.
///
/// Returns `t` with `|g(t)| ≤ tol`. If the bracket collapses to adjacent
/// floating-point values first (a jump in `g`), the endpoint with the smaller
/// residual is returned when it meets `tol`, otherwise `MaxIterations`.
pub fn bisect<G>(mut g: G, lo: f64, hi: f64, tol: f64) -> Result<f64>
where
    G: FnMut(f64) -> f64,
{
    let (mut a, mut b) = (lo.min(hi), lo.max(hi));
    let mut ga = g(a);
    let gb = g(b);
    if ga.abs() <= tol {
        return Ok(a);
    }
    if gb.abs() <= tol {
        return Ok(b);
    }
    if ga.is_nan() || gb.is_nan() || ga.signum() == gb.signum() {
        return Err(OmtError::NoBracket { g_lo: ga, g_hi: gb });
    }
    for _ in 0..MAX_ITER {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let gm = g(mid);
        if gm.abs() <= tol {
            return Ok(mid);
        }
        if gm.signum() == ga.signum() {
            a = mid;
            ga = gm;
        } else {
            b = mid;
        }
    }
    Err(OmtError::MaxIterations(MAX_ITER))
}

/// Root of a monotone `g` on `[lo, hi]` with `|g(t)| ≤ tol`, by the Illinois
/// variant of regula falsi. A bisection step is forced whenever two
/// consecutive steps fail to halve the bracket. Errors as for [`bisect`].
pub fn illinois<G>(mut g: G, lo: f64, hi: f64, tol: f64) -> Result<f64>
where
    G: FnMut(f64) -> f64,
{
    let (mut a, mut b) = (lo.min(hi), lo.max(hi));
    let mut ga = g(a);
    let mut gb = g(b);
    if ga.abs() <= tol {
        return Ok(a);
    }
    if gb.abs() <= tol {
        return Ok(b);
    }
    if ga.is_nan() || gb.is_nan() || ga.signum() == gb.signum() {
        return Err(OmtError::NoBracket { g_lo: ga, g_hi: gb });
    }
    let (mut wa, mut wb) = (ga, gb);
    let mut side = 0i8;
    let mut slow = 0u32;
    for _ in 0..MAX_ITER {
        let width = b - a;
        let forced = slow >= 2;
        let mut x = if forced {
            0.5 * (a + b)
        } else {
            (a * wb - b * wa) / (wb - wa)
        };
        if !x.is_finite() || x <= a || x >= b {
            x = 0.5 * (a + b);
        }
        if x <= a || x >= b {
            break;
        }
        let gx = g(x);
        if gx.abs() <= tol {
            return Ok(x);
        }
        if gx.signum() == ga.signum() {
            a = x;
            ga = gx;
            wa = gx;
            if side == 1 {
                wb *= 0.5;
            }
            side = 1;
        } else {
            b = x;
            gb = gx;
            wb = gx;
            if side == -1 {
                wa *= 0.5;
            }
            side = -1;
        }
        slow = if b - a > 0.5 * width { slow + 1 } else { 0 };
        if forced {
            wa = ga;
            wb = gb;
            side = 0;
        }
    }
    Err(OmtError::MaxIterations(MAX_ITER))
}

/// First point in `(lo, hi]` where a monotone predicate stops holding, to
/// within `x_tol`. `pred(lo)` is assumed true and `pred(hi)` false.
pub(crate) fn predicate_edge<P>(mut pred: P, lo: f64, hi: f64, x_tol: f64) -> (f64, f64)
where
    P: FnMut(f64) -> bool,
{
    let (mut a, mut b) = (lo, hi);
    while b - a > x_tol {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        if pred(mid) {
            a = mid;
        } else {
            b = mid;
        }
    }
    (a, b)
}
