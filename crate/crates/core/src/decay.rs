//! Directional and marginal decay rates, convergence-domain membership and
//! the stationary lower bound for 2d-QBD processes.

use crate::gamma::{extreme_points, GammaGeometry};
use crate::model::{require_negative_drift, MMRWModel};
use crate::search::{bisect, expand, golden_section_max, minimize_convex, BRACKET_CAP};
use crate::spectral::{chi, chi_gradient};
use crate::{Error, Result};

/// Golden-section bracket width for the directional maximization.
const ARGMAX_WIDTH: f64 = 1e-10;
/// Strict margin of [`domain_contains`].
pub const DOMAIN_MARGIN: f64 = 1e-10;

/// Direction vector `c = (c1, c2)` of positive integers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Direction {
    pub c1: u32,
    pub c2: u32,
}

impl Direction {
    pub fn new(c1: u32, c2: u32) -> Result<Self> {
        if c1 == 0 || c2 == 0 {
            return Err(Error::InvalidArgument(format!(
                "direction components must be positive integers, got ({c1},{c2})"
            )));
        }
        Ok(Direction { c1, c2 })
    }

    pub fn is_coprime(&self) -> bool {
        gcd(self.c1, self.c2) == 1
    }

    pub fn scaled(&self, k: u32) -> Self {
        Direction {
            c1: self.c1 * k,
            c2: self.c2 * k,
        }
    }

    pub fn dot(&self, theta: [f64; 2]) -> f64 {
        self.c1 as f64 * theta[0] + self.c2 as f64 * theta[1]
    }
}

pub(crate) fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayResult {
    pub direction: Direction,
    /// `sup_{theta in Gamma} <c, theta>`.
    pub rate: f64,
    pub argmax: [f64; 2],
    /// The maximization collapsed onto an end of the search interval.
    pub flat_segment: bool,
}

/// Decay rate of the occupation measure in direction `c`.
pub fn decay_rate(model: &MMRWModel, c: Direction) -> Result<DecayResult> {
    let g = extreme_points(model)?;
    decay_rate_with(&g, c)
}

/// Maximizes `c1 theta1 + c2 zeta2-bar(theta1)` over
/// `[theta_bar_2.0, theta_bar_1.0]` by golden section.
pub fn decay_rate_with(g: &GammaGeometry, c: Direction) -> Result<DecayResult> {
    let (a, b) = (g.theta_bar_2[0], g.theta_bar_1[0]);
    let objective = |t: f64| Ok(c.c1 as f64 * t + c.c2 as f64 * g.zeta_upper(t)?);
    let (mut t, _) = golden_section_max(a, b, ARGMAX_WIDTH, objective)?;
    let end_tol = 2.0 * ARGMAX_WIDTH;
    let flat_segment = t - a <= end_tol || b - t <= end_tol;
    let argmax = if t - a <= end_tol {
        t = a;
        g.theta_bar_2
    } else if b - t <= end_tol {
        t = b;
        g.theta_bar_1
    } else {
        [t, g.zeta_upper(t)?]
    };
    debug_assert!(argmax[0] == t);
    Ok(DecayResult {
        direction: c,
        rate: c.dot(argmax),
        argmax,
        flat_segment,
    })
}

/// `sup { c_min t : chi(c1 t, c2 t) < 1 }` with `c_min = min(c1, c2)`.
pub fn marginal_decay_rate(model: &MMRWModel, c: Direction) -> Result<f64> {
    if !c.is_coprime() {
        return Err(Error::InvalidArgument(format!(
            "marginal decay needs mutually prime components, got ({},{})",
            c.c1, c.c2
        )));
    }
    require_negative_drift(model)?;
    let (c1, c2) = (c.c1 as f64, c.c2 as f64);
    let ray = |t: f64| [c1 * t, c2 * t];
    let unbounded = || Error::Unbounded {
        cap: BRACKET_CAP,
        d1: c1,
        d2: c2,
    };
    let (tmin, cmin) = minimize_convex(0.0, unbounded(), |t| {
        let (v, gr) = chi_gradient(model, ray(t))?;
        Ok((v, c1 * gr[0] + c2 * gr[1]))
    })?;
    if cmin >= 1.0 {
        return Err(Error::NoTwoRoots {
            theta1: c1 * tmin,
            min_chi: cmin,
        });
    }
    let inside = |t: f64| chi(model, ray(t)).map(|v| v < 1.0);
    let (good, bad) = expand(tmin, 1.0, unbounded(), inside)?;
    let (t, _) = bisect(good, bad, inside)?;
    Ok(c1.min(c2) * t)
}

/// Membership in the down-set `D` of `Gamma`.
pub fn domain_contains(model: &MMRWModel, theta: [f64; 2]) -> Result<bool> {
    let g = extreme_points(model)?;
    domain_contains_with(&g, theta)
}

pub fn domain_contains_with(g: &GammaGeometry, theta: [f64; 2]) -> Result<bool> {
    let [t1, t2] = theta;
    if t1 >= g.theta_bar_1[0] - DOMAIN_MARGIN {
        return Ok(false);
    }
    let cap = if t1 <= g.theta_bar_2[0] {
        g.theta_bar_2[1]
    } else {
        g.zeta_upper(t1)?
    };
    Ok(t2 < cap - DOMAIN_MARGIN)
}

/// Points on the north-east frontier of `D`: the horizontal ray left of
/// `theta_bar_2`, the upper boundary of `Gamma` between `theta_bar_2` and
/// `theta_bar_1`, and the vertical ray below `theta_bar_1`. `n` points
/// per piece.
pub fn ne_frontier(g: &GammaGeometry, n: usize) -> Result<Vec<[f64; 2]>> {
    let n = n.max(2);
    let (p2, p1) = (g.theta_bar_2, g.theta_bar_1);
    let mut pts = Vec::with_capacity(3 * n);
    for k in 0..n {
        pts.push([p2[0] - 2.0 * (n - k) as f64 / n as f64, p2[1]]);
    }
    for k in 1..n {
        let t = p2[0] + (p1[0] - p2[0]) * k as f64 / n as f64;
        pts.push([t, g.zeta_upper(t)?]);
    }
    for k in 1..=n {
        pts.push([p1[0], p1[1] - 2.0 * k as f64 / n as f64]);
    }
    Ok(pts)
}

/// Lower bound `-decay_rate(model, c).rate` on the stationary decay rate
/// of a 2d-QBD process with the same interior kernel.
pub fn qbd_stationary_lower_bound(model: &MMRWModel, c: Direction) -> Result<f64> {
    Ok(-decay_rate(model, c)?.rate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gamma::gamma_contains;
    use crate::model::reference::{r1, r2, scalar};
    use crate::model::swap_axes;

    fn dir(a: u32, b: u32) -> Direction {
        Direction::new(a, b).unwrap()
    }

    #[test]
    fn rejects_nonpositive_direction() {
        assert!(Direction::new(0, 1).is_err());
        assert!(Direction::new(2, 4).is_ok_and(|d| !d.is_coprime()));
    }

    #[test]
    fn r1_diagonal_rate() {
        let r = decay_rate(&r1(), dir(1, 1)).unwrap();
        let l3 = 3f64.ln();
        assert!((r.rate - 2.0 * l3).abs() < 1e-10, "{r:?}");
        assert!((r.argmax[0] - l3).abs() < 1e-6 && (r.argmax[1] - l3).abs() < 1e-6);
        assert!(!r.flat_segment);
        assert!((chi(&r1(), r.argmax).unwrap() - 1.0).abs() < 1e-8);
        assert_eq!(r.rate, r.direction.dot(r.argmax));
    }

    #[test]
    fn rate_is_a_supremum_over_a_grid() {
        let m = r1();
        for c in [dir(1, 2), dir(3, 1), dir(2, 3)] {
            let r = decay_rate(&m, c).unwrap();
            for a in 0..60 {
                for b in 0..60 {
                    let t = [-1.0 + a as f64 * 0.045, -1.0 + b as f64 * 0.045];
                    if gamma_contains(&m, t) {
                        assert!(c.dot(t) <= r.rate + 1e-8);
                    }
                }
            }
        }
    }

    #[test]
    fn stationarity_of_the_argmax() {
        let m = r2();
        for c in [dir(1, 2), dir(2, 1), dir(2, 3)] {
            let r = decay_rate(&m, c).unwrap();
            let h = 1e-5;
            let t = r.argmax[0];
            let s = crate::gamma::zeta2_section;
            let d = (s(&m, t + h).unwrap().zeta_upper - s(&m, t - h).unwrap().zeta_upper) / (2.0 * h);
            assert!((d + c.c1 as f64 / c.c2 as f64).abs() < 1e-4, "{c:?} {d}");
        }
    }

    #[test]
    fn swap_symmetry_and_homogeneity() {
        let m = scalar(&[((-1, 0), 0.25), ((1, 1), 0.1), ((0, -1), 0.35), ((0, 1), 0.05), ((1, -1), 0.05), ((0, 0), 0.2)]).unwrap();
        let a = decay_rate(&m, dir(1, 2)).unwrap().rate;
        let b = decay_rate(&swap_axes(&m), dir(2, 1)).unwrap().rate;
        assert!((a - b).abs() < 1e-8);
        for k in [2, 3] {
            let r = decay_rate(&m, dir(1, 2).scaled(k)).unwrap().rate;
            assert!((r - k as f64 * a).abs() < 1e-8);
        }
        let small = decay_rate(&m, dir(1, 1)).unwrap().rate;
        let p = decay_rate(&m, dir(2, 3)).unwrap().argmax;
        assert!(dir(1, 1).dot(p) <= small + 1e-8);
    }

    #[test]
    fn marginal_rates() {
        assert!((marginal_decay_rate(&r1(), dir(1, 1)).unwrap() - 3f64.ln()).abs() < 1e-12);
        let v = marginal_decay_rate(&r1(), dir(1, 2)).unwrap();
        let f = |t: f64| 0.2 + 0.3 * (-t).exp() + 0.1 * t.exp() + 0.3 * (-2.0 * t).exp() + 0.1 * (2.0 * t).exp();
        assert!(f(v - 1e-9) < 1.0 && f(v + 1e-9) > 1.0);
        let grid = (1..20000).map(|k| k as f64 * 1e-4).filter(|&t| f(t) < 1.0).fold(0.0, f64::max);
        assert!((v - grid).abs() < 2e-4);
        assert!(v <= decay_rate(&r1(), dir(1, 2)).unwrap().rate + 1e-8);
        assert!(marginal_decay_rate(&r1(), dir(2, 4)).is_err());
    }

    #[test]
    fn domain_examples() {
        let g = extreme_points(&r1()).unwrap();
        assert!(domain_contains_with(&g, [-5.0, -5.0]).unwrap());
        assert!(!domain_contains_with(&g, [(2.0 + 3f64.sqrt()).ln() + 0.01, 0.0]).unwrap());
        assert!(domain_contains_with(&g, [0.2, g.theta_bar_2[1] - 1e-3]).unwrap());
        assert!(!domain_contains_with(&g, [0.2, g.theta_bar_2[1] + 1e-3]).unwrap());
    }

    #[test]
    fn frontier_offsets() {
        let g = extreme_points(&r2()).unwrap();
        for p in ne_frontier(&g, 10).unwrap() {
            assert!(domain_contains_with(&g, [p[0] - 1e-4, p[1] - 1e-4]).unwrap(), "{p:?}");
            assert!(!domain_contains_with(&g, [p[0] + 1e-4, p[1] + 1e-4]).unwrap(), "{p:?}");
        }
    }

    #[test]
    fn stationary_bound_is_negated_rate() {
        let c = dir(2, 3);
        let a = qbd_stationary_lower_bound(&r1(), c).unwrap();
        assert_eq!(a, -decay_rate(&r1(), c).unwrap().rate);
        assert!((qbd_stationary_lower_bound(&r2(), c).unwrap() - a).abs() < 1e-8);
    }
}
