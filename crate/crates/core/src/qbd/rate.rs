//! Rate matrices, convergence parameters and the matrix-geometric check.

use super::{build_qbd, Alpha, QbdTriple};
use crate::model::MMRWModel;
use crate::occupation::{truncated_fundamental, State};
use crate::spectral::perron_root;
use crate::{Error, Matrix, Result};

#[derive(Debug, Clone, Copy)]
pub struct RateOptions {
    pub max_iter: usize,
    /// Max-norm update at which the iteration stops.
    pub tol: f64,
}

impl Default for RateOptions {
    fn default() -> Self {
        RateOptions {
            max_iter: 1_000_000,
            tol: 1e-14,
        }
    }
}

/// Minimal nonnegative solution of `R = R^2 A_-1 + R A_0 + A_1`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateMatrix {
    pub r: Matrix,
    pub iterations: usize,
    /// Max-norm of `R - (R^2 A_-1 + R A_0 + A_1)`.
    pub residual: f64,
}

/// Iterates `R_{n+1} = A_1 + R_n A_0 + R_n^2 A_-1` from `R_0 = 0`
/// (the first item is `R_1`).
pub fn rate_iterates(t: &QbdTriple) -> impl Iterator<Item = Matrix> + '_ {
    let mut r = Matrix::zeros(t.dim(), t.dim());
    std::iter::from_fn(move || {
        r = step(t, &r);
        Some(r.clone())
    })
}

fn step(t: &QbdTriple, r: &Matrix) -> Matrix {
    &t.a_plus + r * (&t.a_zero + r * &t.a_minus)
}

pub fn solve_rate_matrix(t: &QbdTriple) -> Result<RateMatrix> {
    solve_rate_matrix_with(t, &RateOptions::default())
}

pub fn solve_rate_matrix_with(t: &QbdTriple, opts: &RateOptions) -> Result<RateMatrix> {
    let mut r = Matrix::zeros(t.dim(), t.dim());
    for it in 1..=opts.max_iter {
        let next = step(t, &r);
        let change = (&next - &r).amax();
        r = next;
        if !change.is_finite() {
            break;
        }
        if change <= opts.tol {
            let residual = (&r - step(t, &r)).amax();
            return Ok(RateMatrix {
                r,
                iterations: it,
                residual,
            });
        }
    }
    Err(Error::NoConvergence {
        what: "rate matrix iteration",
        iterations: opts.max_iter,
        detail: format!("representation {}, K={}", t.alpha, t.k),
    })
}

/// `cp(R) = 1 / spr(R)`; `+inf` for `R = 0`.
pub fn cp_estimate(rate: &RateMatrix) -> Result<f64> {
    if rate.r.iter().all(|&x| x == 0.0) {
        return Ok(f64::INFINITY);
    }
    Ok(1.0 / perron_root(&rate.r)?.root)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixGeometricReport {
    pub alpha: Alpha,
    pub k: usize,
    pub k_max: usize,
    /// Truncation of the occupation tables used as reference.
    pub truncation: usize,
    pub max_deviation: f64,
    pub entries_compared: usize,
}

/// Compares `N_{0,k} = N_{0,0} R^k`, `N_{0,0} = (I - A_0 - R A_-1)^{-1}`, with
/// occupation tables on phases `0..=K/2` and levels `0..=k_max`.
pub fn matrix_geometric_check(model: &MMRWModel, alpha: Alpha, k: usize, k_max: usize) -> Result<MatrixGeometricReport> {
    if alpha == Alpha::Diagonal {
        return Err(Error::InvalidArgument("matrix_geometric_check supports representations (1) and (2)".into()));
    }
    let t = build_qbd(model, alpha, k)?;
    let rate = solve_rate_matrix(&t)?;
    let n = t.dim();
    let n00 = (Matrix::identity(n, n) - &t.a_zero - &rate.r * &t.a_minus)
        .try_inverse()
        .ok_or_else(|| Error::NoConvergence {
            what: "N00 inverse",
            iterations: 0,
            detail: "singular I - A0 - R A-1".into(),
        })?;
    let s0 = model.s0();
    let central = k / 2;
    let truncation = 2 * k + k_max;
    let mut nk = n00;
    let mut max_deviation = 0.0f64;
    let mut entries_compared = 0;
    let mut tables = Vec::new();
    for p in 0..=central {
        for j in 0..s0 {
            let origin = match alpha {
                Alpha::X1 => State::new(0, p, j),
                _ => State::new(p, 0, j),
            };
            tables.push(((p, j), truncated_fundamental(model, origin, truncation)?));
        }
    }
    for level in 0..=k_max {
        for ((p, j), table) in &tables {
            for pp in 0..=central {
                for jp in 0..s0 {
                    let q = match alpha {
                        Alpha::X1 => table.get(level, pp, jp),
                        _ => table.get(pp, level, jp),
                    };
                    let v = nk[(p * s0 + j, pp * s0 + jp)];
                    max_deviation = max_deviation.max((v - q).abs());
                    entries_compared += 1;
                }
            }
        }
        nk = &nk * &rate.r;
    }
    Ok(MatrixGeometricReport {
        alpha,
        k,
        k_max,
        truncation,
        max_deviation,
        entries_compared,
    })
}
