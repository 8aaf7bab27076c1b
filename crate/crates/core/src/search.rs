//! Scalar bracketing, bisection and golden-section helpers.

use crate::{Error, Result};

/// Search distances beyond this are treated as an unbounded region.
pub(crate) const BRACKET_CAP: f64 = 50.0;

/// Bisects between `good` (predicate true) and `bad` (predicate false)
/// until the two ends are adjacent floats. Returns the final `(good, bad)`.
pub(crate) fn bisect<F>(mut good: f64, mut bad: f64, mut pred: F) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<bool>,
{
    for _ in 0..2100 {
        let mid = 0.5 * (good + bad);
        if mid == good || mid == bad || (good - bad).abs() < 1e-18 {
            break;
        }
        if pred(mid)? {
            good = mid;
        } else {
            bad = mid;
        }
    }
    Ok((good, bad))
}

/// Walks from `start` in direction `dir` (+1 or -1) with doubling steps
/// `1, 2, 4, ...` until `pred` fails. Returns `(last_true, first_false)`.
pub(crate) fn expand<F>(start: f64, dir: f64, unbounded: Error, mut pred: F) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<bool>,
{
    let mut good = start;
    let mut step = 1.0;
    while step <= 2.0 * BRACKET_CAP {
        let t = start + dir * step;
        if !pred(t)? {
            return Ok((good, t));
        }
        good = t;
        step *= 2.0;
    }
    Err(unbounded)
}

/// Minimizer of a convex function from its derivative sign.
/// `deriv(t)` returns `(f(t), f'(t))`.
pub(crate) fn minimize_convex<F>(start: f64, unbounded: Error, mut deriv: F) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<(f64, f64)>,
{
    let (f0, d0) = deriv(start)?;
    if d0 == 0.0 {
        return Ok((start, f0));
    }
    let dir = if d0 > 0.0 { -1.0 } else { 1.0 };
    // Points on the descending side have derivative sign opposite to `dir`.
    let (good, bad) = expand(start, dir, unbounded, |t| Ok(deriv(t)?.1 * dir < 0.0))?;
    let (good, bad) = bisect(good, bad, |t| Ok(deriv(t)?.1 * dir < 0.0))?;
    let (fg, _) = deriv(good)?;
    let (fb, _) = deriv(bad)?;
    Ok(if fg <= fb { (good, fg) } else { (bad, fb) })
}

/// Golden-section maximization of a unimodal function on `[a, b]`,
/// stopping when the bracket is narrower than `tol`.
pub(crate) fn golden_section_max<F>(mut a: f64, mut b: f64, tol: f64, mut f: F) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while (b - a).abs() > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
    }
    let x = 0.5 * (a + b);
    let fx = f(x)?;
    Ok((x, fx))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unb() -> Error {
        Error::Unbounded { cap: BRACKET_CAP, d1: 1.0, d2: 0.0 }
    }

    #[test]
    fn bisect_finds_sqrt2() {
        let (g, b) = bisect(1.0, 2.0, |x| Ok(x * x < 2.0)).unwrap();
        assert!((g - 2f64.sqrt()).abs() <= 4e-16 && g < b);
    }

    #[test]
    fn expand_doubles_until_failure() {
        let (g, b) = expand(0.0, 1.0, unb(), |x| Ok(x < 5.0)).unwrap();
        assert_eq!((g, b), (4.0, 8.0));
        assert!(expand(0.0, -1.0, unb(), |_| Ok(true)).is_err());
    }

    #[test]
    fn convex_minimum_from_derivative() {
        let (t, f) = minimize_convex(0.0, unb(), |t| Ok(((t - 3.7).powi(2) + 1.0, 2.0 * (t - 3.7)))).unwrap();
        assert!((t - 3.7).abs() < 1e-14 && (f - 1.0).abs() < 1e-15);
        let (t, _) = minimize_convex(0.0, unb(), |t| Ok((t.cosh(), t.sinh()))).unwrap();
        assert_eq!(t, 0.0);
    }

    #[test]
    fn golden_section_on_concave_quadratic() {
        let (x, fx) = golden_section_max(-1.0, 2.0, 1e-10, |x| Ok(-(x - 0.3) * (x - 0.3))).unwrap();
        assert!((x - 0.3).abs() < 1e-7 && fx.abs() < 1e-14);
    }
}
