//! Geometry of `Gamma-bar = {theta : chi(theta) <= 1}`.

use rayon::prelude::*;

use crate::model::{require_negative_drift, MMRWModel};
use crate::search::{bisect, expand, minimize_convex, BRACKET_CAP};
use crate::spectral::{chi, chi_gradient};
use crate::{Error, Result};

/// Root tolerance reported with a [`GammaGeometry`].
pub const DEFAULT_TOL: f64 = 1e-10;
/// Margin used by [`gamma_contains`].
pub const STRICT_TOL: f64 = 1e-12;
/// Inset of [`trace_boundary`] from the tangency points.
pub const TRACE_INSET: f64 = 1e-6;
/// A line whose minimum of `chi` exceeds `1 + MISS_TOL` misses `Gamma-bar`.
const MISS_TOL: f64 = 1e-9;
/// Width of the support set above which a flat segment is reported.
const FLAT_WIDTH: f64 = 1e-6;

/// The two roots of `chi(theta1, .) = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundarySection {
    pub theta1: f64,
    pub zeta_lower: f64,
    pub zeta_upper: f64,
}

/// Maximizer of `<u, theta>` over `Gamma-bar`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupportPoint {
    pub theta: [f64; 2],
    /// `<u, theta>` for the unit vector `u`.
    pub value: f64,
    /// The maximizer is not unique; `theta` is the midpoint of the segment.
    pub flat_segment: bool,
}

/// Extreme points of `Gamma-bar`.
#[derive(Debug, Clone)]
pub struct GammaGeometry {
    /// Maximizer of `theta1`.
    pub theta_bar_1: [f64; 2],
    /// Maximizer of `theta2`.
    pub theta_bar_2: [f64; 2],
    /// Maximizer of `theta1 + theta2`.
    pub theta_bar_11: [f64; 2],
    /// Minimizer of `theta1`.
    pub theta_under_1: [f64; 2],
    /// Minimizer of `theta2`.
    pub theta_under_2: [f64; 2],
    pub tol: f64,
    /// Labels of extreme points that sit on a flat boundary segment.
    pub flat_segments: Vec<&'static str>,
    model: MMRWModel,
}

impl GammaGeometry {
    pub fn model(&self) -> &MMRWModel {
        &self.model
    }

    /// Boundary section at `theta1`.
    pub fn section(&self, theta1: f64) -> Result<BoundarySection> {
        zeta2_section(&self.model, theta1)
    }

    /// Upper boundary `zeta2-bar(theta1)`.
    pub fn zeta_upper(&self, theta1: f64) -> Result<f64> {
        Ok(self.section(theta1)?.zeta_upper)
    }
}

/// `chi(theta) < 1 - 1e-12`; evaluation overflow counts as outside.
pub fn gamma_contains(model: &MMRWModel, theta: [f64; 2]) -> bool {
    chi(model, theta).is_ok_and(|c| c < 1.0 - STRICT_TOL)
}

fn at(base: [f64; 2], w: [f64; 2], t: f64) -> [f64; 2] {
    [base[0] + t * w[0], base[1] + t * w[1]]
}

fn unbounded(w: [f64; 2]) -> Error {
    Error::Unbounded {
        cap: BRACKET_CAP,
        d1: w[0],
        d2: w[1],
    }
}

/// Minimum of `chi` on the line `base + t w`: `(t*, chi*)`.
fn line_minimum(model: &MMRWModel, base: [f64; 2], w: [f64; 2]) -> Result<(f64, f64)> {
    minimize_convex(0.0, unbounded(w), |t| {
        let (c, g) = chi_gradient(model, at(base, w, t))?;
        Ok((c, g[0] * w[0] + g[1] * w[1]))
    })
}

/// Roots of `chi = 1` on the line on either side of the minimizer `tmin`.
fn line_roots(model: &MMRWModel, base: [f64; 2], w: [f64; 2], tmin: f64) -> Result<(f64, f64)> {
    let inside = |t: f64| chi(model, at(base, w, t)).map(|c| c <= 1.0);
    let (g, b) = expand(tmin, 1.0, unbounded(w), inside)?;
    let (upper, _) = bisect(g, b, inside)?;
    let (g, b) = expand(tmin, -1.0, unbounded([-w[0], -w[1]]), inside)?;
    let (lower, _) = bisect(g, b, inside)?;
    Ok((lower, upper))
}

/// Both roots of `chi(theta1, .) = 1`, bisected on each side of the
/// minimizer of the convex section.
pub fn zeta2_section(model: &MMRWModel, theta1: f64) -> Result<BoundarySection> {
    let (base, w) = ([theta1, 0.0], [0.0, 1.0]);
    let (tmin, cmin) = line_minimum(model, base, w)?;
    if cmin > 1.0 + MISS_TOL {
        return Err(Error::NoTwoRoots { theta1, min_chi: cmin });
    }
    let degenerate = BoundarySection {
        theta1,
        zeta_lower: tmin,
        zeta_upper: tmin,
    };
    if cmin >= 1.0 {
        return Ok(degenerate);
    }
    let (lo, hi) = line_roots(model, base, w, tmin)?;
    if hi - lo < DEFAULT_TOL {
        return Ok(degenerate);
    }
    Ok(BoundarySection {
        theta1,
        zeta_lower: lo,
        zeta_upper: hi,
    })
}

/// Maximizer of `<u, theta>` over `Gamma-bar` for a nonzero direction `u`.
///
/// Outer bisection on `s` for `min_t chi(s u + t w) = 1` (`w` orthogonal to
/// `u`); the inner minimum is located by bisection on the sign of the
/// directional derivative.
pub fn support_point(model: &MMRWModel, direction: [f64; 2]) -> Result<SupportPoint> {
    let norm = direction[0].hypot(direction[1]);
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Error::InvalidArgument("support direction must be nonzero".into()));
    }
    let u = [direction[0] / norm, direction[1] / norm];
    let w = [-u[1], u[0]];
    let reaches = |s: f64| Ok(line_minimum(model, [s * u[0], s * u[1]], w)?.1 <= 1.0);
    let (good, bad) = expand(0.0, 1.0, unbounded(u), reaches)?;
    let (s, _) = bisect(good, bad, reaches)?;
    let base = [s * u[0], s * u[1]];
    let (tmin, _) = line_minimum(model, base, w)?;
    let (lo, hi) = line_roots(model, base, w, tmin)?;
    let flat_segment = hi - lo > FLAT_WIDTH;
    let t = if flat_segment { 0.5 * (lo + hi) } else { tmin };
    let theta = at(base, w, t);
    Ok(SupportPoint {
        theta,
        value: u[0] * theta[0] + u[1] * theta[1],
        flat_segment,
    })
}

/// The five extreme points of `Gamma-bar`. Requires a negative drift
/// component.
pub fn extreme_points(model: &MMRWModel) -> Result<GammaGeometry> {
    require_negative_drift(model)?;
    let dirs: [(&'static str, [f64; 2]); 5] = [
        ("theta_bar_1", [1.0, 0.0]),
        ("theta_bar_2", [0.0, 1.0]),
        ("theta_bar_11", [1.0, 1.0]),
        ("theta_under_1", [-1.0, 0.0]),
        ("theta_under_2", [0.0, -1.0]),
    ];
    let pts: Vec<SupportPoint> = dirs
        .par_iter()
        .map(|(_, d)| support_point(model, *d))
        .collect::<Result<_>>()?;
    let flat_segments = dirs
        .iter()
        .zip(&pts)
        .filter(|(_, p)| p.flat_segment)
        .map(|((name, _), _)| *name)
        .collect();
    Ok(GammaGeometry {
        theta_bar_1: pts[0].theta,
        theta_bar_2: pts[1].theta,
        theta_bar_11: pts[2].theta,
        theta_under_1: pts[3].theta,
        theta_under_2: pts[4].theta,
        tol: DEFAULT_TOL,
        flat_segments,
        model: model.clone(),
    })
}

/// Boundary sections on a uniform `theta1` grid over
/// `[theta_under_1 + 1e-6, theta_bar_1 - 1e-6]`.
pub fn trace_boundary(model: &MMRWModel, n_points: usize) -> Result<Vec<BoundarySection>> {
    if n_points < 2 {
        return Err(Error::InvalidArgument("trace_boundary needs at least 2 points".into()));
    }
    let g = extreme_points(model)?;
    trace_with(&g, n_points)
}

pub fn trace_with(g: &GammaGeometry, n_points: usize) -> Result<Vec<BoundarySection>> {
    let a = g.theta_under_1[0] + TRACE_INSET;
    let b = g.theta_bar_1[0] - TRACE_INSET;
    let step = (b - a) / (n_points - 1) as f64;
    (0..n_points)
        .into_par_iter()
        .map(|k| {
            let t = if k + 1 == n_points { b } else { a + k as f64 * step };
            g.section(t)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::reference::{r0, r1, r2, scalar};
    use crate::model::swap_axes;

    fn ln(x: f64) -> f64 {
        x.ln()
    }

    #[test]
    fn contains_examples() {
        assert!(gamma_contains(&r1(), [0.5, 0.5]));
        assert!(!gamma_contains(&r1(), [ln(3.0), ln(3.0)]));
        assert!(!gamma_contains(&r1(), [10.0, 10.0]));
        assert!(!gamma_contains(&r1(), [1e6, 0.0]));
    }

    #[test]
    fn sections_of_r1() {
        for t in [0.0, ln(3.0)] {
            let s = zeta2_section(&r1(), t).unwrap();
            assert!(s.zeta_lower.abs() < 1e-10, "{s:?}");
            assert!((s.zeta_upper - ln(3.0)).abs() < 1e-10, "{s:?}");
        }
        let s = zeta2_section(&r1(), ln(2.0 + 3f64.sqrt())).unwrap();
        assert!((s.zeta_lower - 0.5 * ln(3.0)).abs() < 1e-6);
        assert!((s.zeta_upper - 0.5 * ln(3.0)).abs() < 1e-6);
        assert!(matches!(zeta2_section(&r1(), 1.5), Err(Error::NoTwoRoots { .. })));
    }

    #[test]
    fn extreme_points_of_r1() {
        let g = extreme_points(&r1()).unwrap();
        let (a, h) = (ln(2.0 + 3f64.sqrt()), 0.5 * ln(3.0));
        let close = |p: [f64; 2], q: [f64; 2]| (p[0] - q[0]).abs() < 1e-10 && (p[1] - q[1]).abs() < 1e-10;
        assert!(close(g.theta_bar_1, [a, h]), "{:?}", g.theta_bar_1);
        assert!(close(g.theta_bar_2, [h, a]), "{:?}", g.theta_bar_2);
        assert!(close(g.theta_bar_11, [ln(3.0), ln(3.0)]), "{:?}", g.theta_bar_11);
        // 0.1 x^2 - (0.8 - 2 sqrt(0.03)) x + 0.3 = 0, lower root.
        let b = 0.8 - 2.0 * 0.03f64.sqrt();
        let lower = ln((b - (b * b - 0.12).sqrt()) / 0.2);
        assert!(close(g.theta_under_1, [lower, h]), "{:?}", g.theta_under_1);
        assert!(g.flat_segments.is_empty());
    }

    #[test]
    fn extreme_points_refuse_positive_drift() {
        let m = scalar(&[((1, 0), 0.3), ((0, 1), 0.3), ((-1, 0), 0.2), ((0, -1), 0.2)]).unwrap();
        assert!(matches!(extreme_points(&m), Err(Error::DriftAssumption { .. })));
    }

    #[test]
    fn unbounded_region_is_reported() {
        assert!(matches!(extreme_points(&r0()), Err(Error::Unbounded { .. })));
    }

    #[test]
    fn trace_is_on_boundary() {
        let pts = trace_boundary(&r1(), 3).unwrap();
        let mid = pts[1];
        assert!((mid.theta1 - 0.5 * ln(3.0)).abs() < 1e-12);
        assert!((mid.zeta_upper - ln(2.0 + 3f64.sqrt())).abs() < 1e-8);
        let pts = trace_boundary(&r2(), 17).unwrap();
        let r1pts = trace_boundary(&r1(), 17).unwrap();
        for (p, q) in pts.iter().zip(&r1pts) {
            for z in [p.zeta_lower, p.zeta_upper] {
                assert!((chi(&r2(), [p.theta1, z]).unwrap() - 1.0).abs() <= 1e-8);
            }
            assert!((p.zeta_upper - q.zeta_upper).abs() <= 1e-8);
            assert!(gamma_contains(&r2(), [p.theta1 - 1e-3, p.zeta_upper - 1e-3]) || p.theta1 < 0.5 * ln(3.0));
        }
        assert!(trace_boundary(&r1(), 1).is_err());
    }

    #[test]
    fn swap_equivariance() {
        let m = crate::model::reference::modulated(
            &scalar(&[((-1, 0), 0.25), ((1, 1), 0.1), ((0, -1), 0.35), ((0, 1), 0.05), ((1, -1), 0.05), ((0, 0), 0.2)]).unwrap(),
            &nalgebra::DMatrix::from_row_slice(2, 2, &[0.7, 0.3, 0.4, 0.6]),
        )
        .unwrap();
        let g = extreme_points(&m).unwrap();
        let s = extreme_points(&swap_axes(&m)).unwrap();
        let sw = |p: [f64; 2]| [p[1], p[0]];
        for (p, q) in [
            (g.theta_bar_1, sw(s.theta_bar_2)),
            (g.theta_bar_2, sw(s.theta_bar_1)),
            (g.theta_bar_11, sw(s.theta_bar_11)),
            (g.theta_under_1, sw(s.theta_under_2)),
        ] {
            assert!((p[0] - q[0]).abs() < 1e-8 && (p[1] - q[1]).abs() < 1e-8, "{p:?} {q:?}");
        }
    }
}
