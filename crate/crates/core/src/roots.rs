//! Scalar root finding: Brent's method plus an outward bracket search.

use crate::error::{Error, Result};

/// Brent's method on a bracket `[a, b]` with `f(a)·f(b) ≤ 0`.
///
/// Terminates when the bracket is narrower than `xtol` (plus a few ulps of
/// the iterate) or an exact zero is hit.
pub fn brent<F>(mut f: F, a: f64, b: f64, xtol: f64, max_iter: usize) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    let (mut a, mut b) = (a, b);
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if !(fa.is_finite() && fb.is_finite()) || fa.signum() == fb.signum() {
        return Err(Error::RootFindFailed(format!("interval [{a}, {b}] does not bracket a root (f = {fa}, {fb})")));
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..max_iter {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = f(b);
        if !fb.is_finite() {
            return Err(Error::RootFindFailed(format!("non-finite function value at {b}")));
        }
    }
    Err(Error::RootFindFailed(format!("Brent iteration did not converge in {max_iter} steps")))
}

/// Result of [`bracket_nearest`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NearestRoot {
    pub root: f64,
    /// Sign changes were found on both sides of the guess at the same
    /// expansion level, so the choice of root was ambiguous.
    pub ambiguous: bool,
}

/// Search outward from `guess` for the nearest sign change of `f`, then
/// refine it with Brent's method.
///
/// The bracket half-width starts at `delta0` and doubles until it exceeds
/// `delta_max`. Non-finite function values (points outside the domain of
/// `f`) never count as a sign change.
pub fn bracket_nearest<F>(mut f: F, guess: f64, delta0: f64, delta_max: f64, xtol: f64) -> Result<NearestRoot>
where
    F: FnMut(f64) -> f64,
{
    let f0 = f(guess);
    if f0 == 0.0 {
        return Ok(NearestRoot { root: guess, ambiguous: false });
    }
    // Innermost finite samples on each side.
    let (mut x_lo_in, mut f_lo_in) = (guess, f0);
    let (mut x_hi_in, mut f_hi_in) = (guess, f0);
    let mut delta = delta0;
    while delta <= delta_max {
        let lo = guess - delta;
        let hi = guess + delta;
        let f_lo = f(lo);
        let f_hi = f(hi);
        let lo_change = changes_sign(f_lo, f_lo_in);
        let hi_change = changes_sign(f_hi_in, f_hi);
        if lo_change || hi_change {
            let ambiguous = lo_change && hi_change;
            let take_lo = if ambiguous {
                // Pick the side whose secant estimate sits closer to the guess.
                secant_distance(x_lo_in, f_lo_in, lo, f_lo, guess) <= secant_distance(x_hi_in, f_hi_in, hi, f_hi, guess)
            } else {
                lo_change
            };
            let (a, b) = if take_lo { (lo, x_lo_in) } else { (x_hi_in, hi) };
            let root = brent(&mut f, a, b, xtol, 200)?;
            return Ok(NearestRoot { root, ambiguous });
        }
        if f_lo.is_finite() {
            x_lo_in = lo;
            f_lo_in = f_lo;
        }
        if f_hi.is_finite() {
            x_hi_in = hi;
            f_hi_in = f_hi;
        }
        delta *= 2.0;
    }
    Err(Error::RootFindFailed(format!("no sign change within ±{delta_max} of {guess}")))
}

fn changes_sign(a: f64, b: f64) -> bool {
    a.is_finite() && b.is_finite() && (a == 0.0 || b == 0.0 || a.signum() != b.signum())
}

fn secant_distance(x0: f64, f0: f64, x1: f64, f1: f64, guess: f64) -> f64 {
    let denom = f1 - f0;
    if denom == 0.0 {
        return (0.5 * (x0 + x1) - guess).abs();
    }
    (x0 - f0 * (x1 - x0) / denom - guess).abs()
}
