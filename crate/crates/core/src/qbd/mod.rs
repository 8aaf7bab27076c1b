//! Quasi-birth-and-death representations of the walk with finite phase
//! truncation, their rate matrices, the c-expansion and block circulants.

mod expand;
mod rate;

pub use expand::{block_circulant, c_expand, ExpandedModel};
pub use rate::{
    cp_estimate, matrix_geometric_check, rate_iterates, solve_rate_matrix, solve_rate_matrix_with, MatrixGeometricReport,
    RateMatrix, RateOptions,
};

use std::fmt;

use crate::model::MMRWModel;
use crate::{Error, Matrix, Result};

/// Level direction of a QBD representation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Alpha {
    /// Level `x1`, phase `(x2, j)` with `x2 in 0..=K`.
    X1,
    /// Level `x2`, phase `(x1, j)` with `x1 in 0..=K`.
    X2,
    /// Level `min(x1, x2)`, phase `(x1 - x2, j)` with `x1 - x2 in -K..=K`.
    Diagonal,
}

impl fmt::Display for Alpha {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Alpha::X1 => "(1)",
            Alpha::X2 => "(2)",
            Alpha::Diagonal => "(1,1)",
        })
    }
}

impl std::str::FromStr for Alpha {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().trim_start_matches('(').trim_end_matches(')').replace(' ', "").as_str() {
            "1" => Ok(Alpha::X1),
            "2" => Ok(Alpha::X2),
            "1,1" | "11" => Ok(Alpha::Diagonal),
            _ => Err(Error::InvalidArgument(format!("unknown representation `{s}`; use 1, 2 or 1,1"))),
        }
    }
}

/// Truncated blocks `(A_-1, A_0, A_1)` of a QBD representation.
#[derive(Debug, Clone, PartialEq)]
pub struct QbdTriple {
    pub alpha: Alpha,
    pub k: usize,
    pub s0: usize,
    pub a_minus: Matrix,
    pub a_zero: Matrix,
    pub a_plus: Matrix,
}

impl QbdTriple {
    pub fn dim(&self) -> usize {
        self.a_zero.nrows()
    }

    /// Number of phase positions (excluding the background index).
    pub fn phases(&self) -> usize {
        self.dim() / self.s0
    }

    /// Block index of phase position `p` (`x1 - x2` for the diagonal
    /// representation, otherwise the coordinate itself).
    pub fn position(&self, p: i64) -> Option<usize> {
        let shift = if self.alpha == Alpha::Diagonal { self.k as i64 } else { 0 };
        let idx = p + shift;
        (0..self.phases() as i64).contains(&idx).then_some(idx as usize)
    }
}

/// Placements `(column offset, step)` in the row of phase `i` of the
/// diagonal representation's level-change block `level`.
pub fn diagonal_row(level: i32, i: i64) -> &'static [(i64, (i32, i32))] {
    match (level, i) {
        (-1, i) if i < 0 => &[(-2, (-1, 1)), (-1, (-1, 0)), (0, (-1, -1))],
        (-1, 0) => &[(-2, (-1, 1)), (-1, (-1, 0)), (0, (-1, -1)), (1, (0, -1)), (2, (1, -1))],
        (-1, _) => &[(0, (-1, -1)), (1, (0, -1)), (2, (1, -1))],
        (0, i) if i <= -2 => &[(-1, (0, 1)), (0, (0, 0)), (1, (0, -1))],
        (0, -1) => &[(-1, (0, 1)), (0, (0, 0)), (1, (0, -1)), (2, (1, -1))],
        (0, 0) => &[(-1, (0, 1)), (0, (0, 0)), (1, (1, 0))],
        (0, 1) => &[(-2, (-1, 1)), (-1, (-1, 0)), (0, (0, 0)), (1, (1, 0))],
        (0, _) => &[(-1, (-1, 0)), (0, (0, 0)), (1, (1, 0))],
        (1, i) if i <= -2 => &[(0, (1, 1)), (1, (1, 0)), (2, (1, -1))],
        (1, -1) => &[(0, (1, 1)), (1, (1, 0))],
        (1, 0) => &[(0, (1, 1))],
        (1, 1) => &[(-1, (0, 1)), (0, (1, 1))],
        (1, _) => &[(-2, (-1, 1)), (-1, (0, 1)), (0, (1, 1))],
        _ => panic!("level change must be -1, 0 or 1"),
    }
}

fn put(m: &mut Matrix, s0: usize, row: usize, col: usize, b: &Matrix) {
    m.view_mut((row * s0, col * s0), (s0, s0)).copy_from(b);
}

/// Builds the truncated triple; phases outside the window are killed.
pub fn build_qbd(model: &MMRWModel, alpha: Alpha, k: usize) -> Result<QbdTriple> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("phase truncation K must be at least 2, got {k}")));
    }
    let s0 = model.s0();
    let (lo, hi) = match alpha {
        Alpha::Diagonal => (-(k as i64), k as i64),
        _ => (0, k as i64),
    };
    let n = (hi - lo + 1) as usize;
    let mut blocks = [Matrix::zeros(n * s0, n * s0), Matrix::zeros(n * s0, n * s0), Matrix::zeros(n * s0, n * s0)];
    for (slot, level) in (-1..=1).enumerate() {
        let m = &mut blocks[slot];
        for p in lo..=hi {
            let placements: Vec<(i64, (i32, i32))> = match alpha {
                Alpha::X1 => (-1..=1).map(|d| (d as i64, (level, d))).collect(),
                Alpha::X2 => (-1..=1).map(|d| (d as i64, (d, level))).collect(),
                Alpha::Diagonal => diagonal_row(level, p).to_vec(),
            };
            for (off, (i, j)) in placements {
                let q = p + off;
                if (lo..=hi).contains(&q) {
                    put(m, s0, (p - lo) as usize, (q - lo) as usize, model.block(i, j));
                }
            }
        }
    }
    let [a_minus, a_zero, a_plus] = blocks;
    Ok(QbdTriple {
        alpha,
        k,
        s0,
        a_minus,
        a_zero,
        a_plus,
    })
}

/// `A^{(1,1)}_{*,j}(theta)` for `j in -2..=2`.
pub fn a11_component(model: &MMRWModel, j: i32, theta: f64) -> Matrix {
    let (e, ei) = (theta.exp(), (-theta).exp());
    match j {
        -2 => model.block(-1, 1) * e,
        -1 => model.block(-1, 0) + model.block(0, 1) * e,
        0 => model.block(-1, -1) * ei + model.block(0, 0) + model.block(1, 1) * e,
        1 => model.block(0, -1) * ei + model.block(1, 0),
        2 => model.block(1, -1) * ei,
        _ => panic!("component index must lie in -2..=2"),
    }
}

/// `A^{(1,1)}_{*,*}(theta1, theta2) = sum_j e^{j theta2} A^{(1,1)}_{*,j}(theta1)`.
pub fn a11_symbol(model: &MMRWModel, theta1: f64, theta2: f64) -> Matrix {
    (-2..=2).map(|j| a11_component(model, j, theta1) * (j as f64 * theta2).exp()).sum()
}

/// `e^{-theta} A_-1 + A_0 + e^{theta} A_1` of the diagonal representation on
/// phases `-window..=window`.
pub fn build_a11_operator(model: &MMRWModel, theta: f64, window: usize) -> Result<Matrix> {
    let t = build_qbd(model, Alpha::Diagonal, window)?;
    Ok(t.a_minus * (-theta).exp() + t.a_zero + t.a_plus * theta.exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::reference::{r1, r2, scalar};
    use crate::model::STEPS;
    use crate::spectral::feynman_kac;

    /// A model whose nine blocks are distinguishable scalars.
    fn tagged() -> MMRWModel {
        let w: Vec<f64> = (1..=9).map(|k| k as f64).collect();
        let s: f64 = w.iter().sum();
        scalar(&STEPS.iter().zip(&w).map(|(&st, &x)| (st, x / s)).collect::<Vec<_>>()).unwrap()
    }

    /// Transitions of the diagonal representation from the state map
    /// `(x1, x2) -> (min(x1, x2), x1 - x2)`.
    fn diagonal_oracle(model: &MMRWModel, k: usize) -> [Matrix; 3] {
        let n = 2 * k + 1;
        let mut out = [Matrix::zeros(n, n), Matrix::zeros(n, n), Matrix::zeros(n, n)];
        let level = 10i64;
        for i in -(k as i64)..=k as i64 {
            let (x1, x2) = if i >= 0 { (level + i, level) } else { (level, level - i) };
            for (d1, d2) in STEPS {
                let (y1, y2) = (x1 + d1 as i64, x2 + d2 as i64);
                let (dl, ip) = (y1.min(y2) - level, y1 - y2);
                if ip.abs() <= k as i64 {
                    out[(dl + 1) as usize][((i + k as i64) as usize, (ip + k as i64) as usize)] += model.block(d1, d2)[(0, 0)];
                }
            }
        }
        out
    }

    #[test]
    fn diagonal_layout_matches_the_state_map() {
        let m = tagged();
        for k in [2, 3, 5] {
            let t = build_qbd(&m, Alpha::Diagonal, k).unwrap();
            let o = diagonal_oracle(&m, k);
            assert_eq!(t.a_minus, o[0]);
            assert_eq!(t.a_zero, o[1]);
            assert_eq!(t.a_plus, o[2]);
        }
    }

    #[test]
    fn diagonal_phase_zero_row_of_a_zero() {
        let m = tagged();
        let t = build_qbd(&r1(), Alpha::Diagonal, 3).unwrap();
        let p = t.position(0).unwrap();
        let row: Vec<f64> = t.a_zero.row(p).iter().copied().collect();
        assert_eq!(row[p - 1], r1().block(0, 1)[(0, 0)]);
        assert_eq!(row[p], r1().block(0, 0)[(0, 0)]);
        assert_eq!(row[p + 1], r1().block(1, 0)[(0, 0)]);
        let t = build_qbd(&m, Alpha::Diagonal, 3).unwrap();
        let nz: Vec<usize> = (0..7).filter(|&c| t.a_zero[(3, c)] != 0.0).collect();
        assert_eq!(nz, vec![2, 3, 4]);
    }

    #[test]
    fn axis_representation_layout() {
        let t = build_qbd(&r1(), Alpha::X1, 2).unwrap();
        let expected = Matrix::from_diagonal_element(3, 3, 0.1);
        assert_eq!(t.a_plus, expected);
        let m = tagged();
        let t = build_qbd(&m, Alpha::X2, 4).unwrap();
        for p in 0..5usize {
            for q in 0..5usize {
                let d = q as i32 - p as i32;
                let want = if d.abs() <= 1 { m.block(d, 1)[(0, 0)] } else { 0.0 };
                assert_eq!(t.a_plus[(p, q)], want);
            }
        }
    }

    #[test]
    fn interior_rows_are_stochastic() {
        for alpha in [Alpha::X1, Alpha::X2, Alpha::Diagonal] {
            let t = build_qbd(&r2(), alpha, 6).unwrap();
            let total = &t.a_minus + &t.a_zero + &t.a_plus;
            for r in 0..t.dim() {
                let s = total.row(r).sum();
                assert!(s <= 1.0 + 1e-12);
                let p = r / t.s0;
                if p >= 2 && p + 2 < t.phases() {
                    assert!((s - 1.0).abs() <= 1e-12, "{alpha} row {r}");
                }
            }
        }
    }

    #[test]
    fn a11_components_and_shift_identity() {
        let m = tagged();
        assert_eq!(a11_component(&m, -2, 0.0), *m.block(-1, 1));
        assert_eq!(a11_component(&r1(), -2, 0.7), Matrix::zeros(1, 1));
        for (a, b) in [(0.3, -0.4), (-1.0, 0.8), (0.0, 0.0)] {
            let lhs = a11_symbol(&r2(), a + b, a);
            let rhs = feynman_kac(&r2(), [a, b]).unwrap();
            assert!((lhs - rhs).amax() < 1e-12);
        }
    }

    #[test]
    fn a11_operator_matches_the_quintuple_layout() {
        let m = tagged();
        let (theta, w) = (0.37, 4usize);
        let op = build_a11_operator(&m, theta, w).unwrap();
        let c = |j: i32| a11_component(&m, j, theta)[(0, 0)];
        let bar = |j: i32| (j as f64 * theta).exp() * c(j);
        let a1m1 = m.block(1, -1)[(0, 0)];
        let a_m11 = m.block(-1, 1)[(0, 0)];
        let n = 2 * w + 1;
        let mut want = Matrix::zeros(n, n);
        for i in -(w as i64)..=w as i64 {
            let row: Vec<(i64, f64)> = match i {
                i if i <= -2 => (-2..=2).map(|j| (i + j as i64, bar(j))).collect(),
                -1 => vec![(-3, bar(-2)), (-2, bar(-1)), (-1, bar(0)), (0, bar(1)), (1, a1m1)],
                0 => vec![(-2, bar(-2)), (-1, bar(-1)), (0, c(0)), (1, c(1)), (2, c(2))],
                1 => vec![(-1, a_m11), (0, c(-1)), (1, c(0)), (2, c(1)), (3, c(2))],
                _ => (-2..=2).map(|j| (i + j as i64, c(j))).collect(),
            };
            for (col, v) in row {
                if col.abs() <= w as i64 {
                    want[((i + w as i64) as usize, (col + w as i64) as usize)] = v;
                }
            }
        }
        assert!((op - want).amax() < 1e-15);
    }

    #[test]
    fn parses_alpha() {
        assert_eq!("1".parse::<Alpha>().unwrap(), Alpha::X1);
        assert_eq!("(1,1)".parse::<Alpha>().unwrap(), Alpha::Diagonal);
        assert_eq!("11".parse::<Alpha>().unwrap(), Alpha::Diagonal);
        assert!("3".parse::<Alpha>().is_err());
        assert!(build_qbd(&r1(), Alpha::X1, 1).is_err());
    }
}
