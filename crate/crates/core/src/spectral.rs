//! Feynman-Kac operators and Perron roots of nonnegative matrices.

use nalgebra::DVector;

use crate::model::{MMRWModel, STEPS};
use crate::{Error, Matrix, Result};

/// Largest exponent accepted before `exp` is treated as overflow.
const MAX_EXPONENT: f64 = 700.0;

/// Power-iteration controls for [`perron_root_with`].
#[derive(Debug, Clone, Copy)]
pub struct PerronOptions {
    pub max_iter: usize,
    /// Relative tolerance on the root.
    pub tol: f64,
}

impl Default for PerronOptions {
    fn default() -> Self {
        PerronOptions {
            max_iter: 100_000,
            tol: 1e-13,
        }
    }
}

/// Perron root with left and right eigenvectors (`right` sums to 1,
/// `left . right = 1`).
#[derive(Debug, Clone)]
pub struct PerronPair {
    pub root: f64,
    pub left: DVector<f64>,
    pub right: DVector<f64>,
    pub iterations: usize,
}

/// `A_**(theta)` with its Perron data.
#[derive(Debug, Clone)]
pub struct OperatorEvaluation {
    pub theta: [f64; 2],
    pub matrix: Matrix,
    pub perron_root: f64,
    pub left_vector: DVector<f64>,
    pub right_vector: DVector<f64>,
}

fn checked_exp(x: f64, what: &str) -> Result<f64> {
    if !x.is_finite() || x.abs() > MAX_EXPONENT {
        return Err(Error::Overflow(what.to_string()));
    }
    Ok(x.exp())
}

/// `A_**(theta) = sum e^{i theta1 + j theta2} A[i,j]`.
pub fn feynman_kac(model: &MMRWModel, theta: [f64; 2]) -> Result<Matrix> {
    weighted_sum(model, theta, |_, _| 1.0)
}

/// `sum w(i,j) e^{i theta1 + j theta2} A[i,j]`.
fn weighted_sum(model: &MMRWModel, theta: [f64; 2], w: impl Fn(i32, i32) -> f64) -> Result<Matrix> {
    let mut m = Matrix::zeros(model.s0(), model.s0());
    for (i, j) in STEPS {
        let b = model.block(i, j);
        let weight = w(i, j);
        if weight == 0.0 || b.iter().all(|&x| x == 0.0) {
            continue;
        }
        let e = checked_exp(i as f64 * theta[0] + j as f64 * theta[1], "A_**(theta)")?;
        m += b * (weight * e);
    }
    Ok(m)
}

/// `A_{*,j}(theta)` for `axis = 1`, or `A_{j,*}(theta)` for `axis = 2`.
pub fn marginal_operator(model: &MMRWModel, axis: u8, theta: f64, j: i32) -> Result<Matrix> {
    let mut m = Matrix::zeros(model.s0(), model.s0());
    for k in -1..=1 {
        let (b, e) = match axis {
            1 => (model.block(k, j), k as f64 * theta),
            2 => (model.block(j, k), k as f64 * theta),
            _ => return Err(Error::InvalidArgument(format!("axis must be 1 or 2, got {axis}"))),
        };
        m += b * checked_exp(e, "marginal operator")?;
    }
    Ok(m)
}

pub fn perron_root(m: &Matrix) -> Result<PerronPair> {
    perron_root_with(m, &PerronOptions::default())
}

/// Spectral radius of a nonnegative square matrix by shifted power iteration
/// on `M + delta I`, `delta = 1e-3 * max row sum`, with a Rayleigh refinement
/// from the left vector.
pub fn perron_root_with(m: &Matrix, opts: &PerronOptions) -> Result<PerronPair> {
    assert!(m.is_square(), "perron_root needs a square matrix");
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::Overflow("perron_root input".into()));
    }
    let max_row = m.row_iter().map(|r| r.sum()).fold(0.0, f64::max);
    if max_row <= 0.0 {
        return Err(Error::ZeroMatrix);
    }
    let (right, it_r) = power_vector(m, max_row, opts)?;
    let mt = m.transpose();
    let (mut left, it_l) = power_vector(&mt, max_row, opts)?;

    let mv = m * &right;
    let lr = left.dot(&right);
    let root = if lr > 1e-300 {
        let r = left.dot(&mv) / lr;
        left /= lr;
        r
    } else {
        mv.sum() / right.sum()
    };
    Ok(PerronPair {
        root,
        left,
        right,
        iterations: it_r.max(it_l),
    })
}

/// Dominant nonnegative eigenvector (sum 1) of `m`.
fn power_vector(m: &Matrix, max_row: f64, opts: &PerronOptions) -> Result<(DVector<f64>, usize)> {
    let n = m.nrows();
    let delta = 1e-3 * max_row;
    let mut v = DVector::from_element(n, 1.0 / n as f64);
    let mut prev = f64::NAN;
    let mut steady = 0;
    for it in 1..=opts.max_iter {
        let mut w = m * &v;
        w.axpy(delta, &v, 1.0);
        let lambda = w.sum();
        let vmax = v.amax();
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for (wi, vi) in w.iter().zip(v.iter()) {
            if *vi > 1e-200 * vmax {
                let r = wi / vi;
                lo = lo.min(r);
                hi = hi.max(r);
            }
        }
        w /= lambda;
        let change = (&w - &v).amax();
        v = w;
        if hi - lo <= opts.tol * hi {
            return Ok((v, it));
        }
        if change <= opts.tol * v.amax() {
            steady += 1;
            if steady >= 50 {
                return Ok((v, it));
            }
        } else {
            steady = 0;
        }
        prev = lambda;
    }
    Err(Error::NoConvergence {
        what: "perron_root",
        iterations: opts.max_iter,
        detail: format!("last estimate {}", prev - delta),
    })
}

/// Full evaluation of `A_**(theta)` and its Perron data.
pub fn evaluate(model: &MMRWModel, theta: [f64; 2]) -> Result<OperatorEvaluation> {
    let matrix = feynman_kac(model, theta)?;
    let p = perron_root(&matrix)?;
    Ok(OperatorEvaluation {
        theta,
        matrix,
        perron_root: p.root,
        left_vector: p.left,
        right_vector: p.right,
    })
}

/// `chi(theta) = spr(A_**(theta))`.
pub fn chi(model: &MMRWModel, theta: [f64; 2]) -> Result<f64> {
    if model.s0() == 1 {
        return Ok(feynman_kac(model, theta)?[(0, 0)]);
    }
    Ok(perron_root(&feynman_kac(model, theta)?)?.root)
}

/// `chi(theta)` and its gradient `u' dA v / u' v`.
pub fn chi_gradient(model: &MMRWModel, theta: [f64; 2]) -> Result<(f64, [f64; 2])> {
    let d1 = weighted_sum(model, theta, |i, _| i as f64)?;
    let d2 = weighted_sum(model, theta, |_, j| j as f64)?;
    if model.s0() == 1 {
        return Ok((feynman_kac(model, theta)?[(0, 0)], [d1[(0, 0)], d2[(0, 0)]]));
    }
    let e = evaluate(model, theta)?;
    let (u, v) = (&e.left_vector, &e.right_vector);
    let uv = u.dot(v);
    Ok((e.perron_root, [u.dot(&(&d1 * v)) / uv, u.dot(&(&d2 * v)) / uv]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::reference::{r1, r2};
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn r1_chi(t: [f64; 2]) -> f64 {
        0.2 + 0.3 * (-t[0]).exp() + 0.1 * t[0].exp() + 0.3 * (-t[1]).exp() + 0.1 * t[1].exp()
    }

    #[test]
    fn feynman_kac_values() {
        assert_eq!(feynman_kac(&r1(), [0.0, 0.0]).unwrap()[(0, 0)], 1.0);
        let l3 = 3f64.ln();
        assert!((feynman_kac(&r1(), [l3, l3]).unwrap()[(0, 0)] - 1.0).abs() < 1e-15);
        let t = DMatrix::from_row_slice(2, 2, &[0.9, 0.1, 0.1, 0.9]);
        let theta = [0.3, -0.7];
        let diff = feynman_kac(&r2(), theta).unwrap() - t * r1_chi(theta);
        assert!(diff.amax() < 1e-15);
    }

    #[test]
    fn feynman_kac_overflow() {
        assert!(matches!(feynman_kac(&r1(), [1000.0, 0.0]), Err(Error::Overflow(_))));
    }

    #[test]
    fn marginal_operator_values() {
        assert!((marginal_operator(&r1(), 1, 0.0, 0).unwrap()[(0, 0)] - 0.6).abs() < 1e-15);
        let s: Matrix = (-1..=1).map(|j| marginal_operator(&r2(), 1, 0.0, j).unwrap()).sum();
        assert!((s - r2().total()).amax() < 1e-15);
        let t = DMatrix::from_row_slice(2, 2, &[0.9, 0.1, 0.1, 0.9]);
        assert!((marginal_operator(&r2(), 2, 0.0, 0).unwrap() - t * 0.6).amax() < 1e-15);
        assert!(marginal_operator(&r1(), 3, 0.0, 0).is_err());
    }

    #[test]
    fn perron_root_examples() {
        assert!((perron_root(&Matrix::identity(3, 3)).unwrap().root - 1.0).abs() < 1e-12);
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 0.0]);
        let p = perron_root(&m).unwrap();
        assert!((p.root - 3.0).abs() < 3e-12);
        assert!((&m * &p.right - &p.right * p.root).amax() < 1e-10);
        assert!((p.left.transpose() * &m - p.left.transpose() * p.root).amax() < 1e-10);
        assert!((p.left.dot(&p.right) - 1.0).abs() < 1e-12);
        assert!(matches!(perron_root(&Matrix::zeros(2, 2)), Err(Error::ZeroMatrix)));
    }

    #[test]
    fn perron_root_handles_periodic_and_reducible() {
        let cyc = DMatrix::from_row_slice(3, 3, &[0.0, 2.0, 0.0, 0.0, 0.0, 2.0, 2.0, 0.0, 0.0]);
        assert!((perron_root(&cyc).unwrap().root - 2.0).abs() < 1e-12);
        let red = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.3, 0.5]);
        assert!((perron_root(&red).unwrap().root - 1.0).abs() < 1e-12);
    }

    #[test]
    fn chi_matches_scalar_closed_form() {
        assert_eq!(chi(&r1(), [0.0, 0.0]).unwrap(), 1.0);
        for t in [[0.5, 0.5], [-1.0, 0.3], [1.2, -0.4]] {
            assert!((chi(&r1(), t).unwrap() - r1_chi(t)).abs() < 1e-15);
            assert!((chi(&r2(), t).unwrap() - r1_chi(t)).abs() < 1e-10 * r1_chi(t));
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let h = 1e-6;
        for t in [[0.4, -0.2], [1.0, 0.5]] {
            let (_, g) = chi_gradient(&r2(), t).unwrap();
            let fd1 = (chi(&r2(), [t[0] + h, t[1]]).unwrap() - chi(&r2(), [t[0] - h, t[1]]).unwrap()) / (2.0 * h);
            let fd2 = (chi(&r2(), [t[0], t[1] + h]).unwrap() - chi(&r2(), [t[0], t[1] - h]).unwrap()) / (2.0 * h);
            assert!((g[0] - fd1).abs() < 1e-8 && (g[1] - fd2).abs() < 1e-8);
        }
    }

    fn arb_nonneg(n: usize) -> impl Strategy<Value = Matrix> {
        prop::collection::vec(0.01f64..2.0, n * n).prop_map(move |v| DMatrix::from_row_slice(n, n, &v))
    }

    proptest! {
        #[test]
        fn perron_pair_satisfies_eigen_residuals(m in (1usize..6).prop_flat_map(arb_nonneg)) {
            let p = perron_root(&m).unwrap();
            prop_assert!((&m * &p.right - &p.right * p.root).amax() <= 1e-10 * p.root.max(1.0));
            prop_assert!((p.left.transpose() * &m - p.left.transpose() * p.root).amax() <= 1e-10 * p.root.max(1.0));
            prop_assert!(p.right.iter().all(|&x| x > 0.0) && p.left.iter().all(|&x| x > 0.0));
        }

        #[test]
        fn stochastic_matrices_have_root_one(m in (1usize..6).prop_flat_map(arb_nonneg)) {
            let mut s = m.clone();
            for mut r in s.row_iter_mut() {
                let t = r.sum();
                r /= t;
            }
            prop_assert!((perron_root(&s).unwrap().root - 1.0).abs() <= 1e-12);
        }
    }
}
