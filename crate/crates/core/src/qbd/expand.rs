//! c-expansion of the walk and block-circulant matrices.

use crate::decay::Direction;
use crate::model::{MMRWModel, STEPS};
use crate::{Matrix, Result};

/// The walk re-blocked by quotient and remainder modulo `(c1, c2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpandedModel {
    pub base: MMRWModel,
    pub c: Direction,
    /// Background size `c1 c2 s0`; phase `(m1, m2, j)` has index
    /// `(m2 c1 + m1) s0 + j`.
    pub expanded: MMRWModel,
}

/// `k x k` matrix with a single one at `(a, b)` (0-based).
fn selector(k: usize, a: usize, b: usize) -> Matrix {
    let mut e = Matrix::zeros(k, k);
    e[(a, b)] = 1.0;
    e
}

/// `I (x) diag + U (x) up + L (x) down` with `U`, `L` the unit super- and
/// subdiagonal shifts.
fn tridiagonal(k: usize, down: &Matrix, diag: &Matrix, up: &Matrix) -> Matrix {
    let u = Matrix::from_fn(k, k, |r, c| if c == r + 1 { 1.0 } else { 0.0 });
    Matrix::identity(k, k).kronecker(diag) + u.kronecker(up) + u.transpose().kronecker(down)
}

pub fn c_expand(model: &MMRWModel, c: Direction) -> Result<ExpandedModel> {
    let (k1, k2) = (c.c1 as usize, c.c2 as usize);
    let b = |i: i32, j: i32| -> Matrix {
        match i {
            -1 => selector(k1, 0, k1 - 1).kronecker(model.block(-1, j)),
            1 => selector(k1, k1 - 1, 0).kronecker(model.block(1, j)),
            _ => tridiagonal(k1, model.block(-1, j), model.block(0, j), model.block(1, j)),
        }
    };
    let blocks = STEPS.iter().map(|&(i, j)| {
        let m = match j {
            -1 => selector(k2, 0, k2 - 1).kronecker(&b(i, -1)),
            1 => selector(k2, k2 - 1, 0).kronecker(&b(i, 1)),
            _ => tridiagonal(k2, &b(i, -1), &b(i, 0), &b(i, 1)),
        };
        ((i, j), m)
    });
    let expanded = MMRWModel::new(k1 * k2 * model.s0(), blocks.collect::<Vec<_>>())?;
    Ok(ExpandedModel {
        base: model.clone(),
        c,
        expanded,
    })
}

/// `k x k` block matrix with `C0` on the diagonal, `C1` above, `C-1` below,
/// `e^{-theta} C-1` in the top-right and `e^{theta} C1` in the bottom-left
/// corner.
pub fn block_circulant(c_minus: &Matrix, c_zero: &Matrix, c_plus: &Matrix, theta: f64, k: usize) -> Matrix {
    assert!(k >= 1, "block_circulant needs k >= 1");
    tridiagonal(k, c_minus, c_zero, c_plus)
        + selector(k, 0, k - 1).kronecker(&(c_minus * (-theta).exp()))
        + selector(k, k - 1, 0).kronecker(&(c_plus * theta.exp()))
}
