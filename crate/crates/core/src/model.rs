//! Model definition, parsing, drift and reachability diagnostics.

use std::collections::HashSet;

use nalgebra::{DMatrix, DVector};
use petgraph::algo::kosaraju_scc;
use petgraph::graph::DiGraph;
use serde_json::{Map, Value};

use crate::{Error, Matrix, Result};

/// The nine admissible increments `(i, j)`, in canonical order.
pub const STEPS: [(i32, i32); 9] = [
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, -1),
    (0, 0),
    (0, 1),
    (1, -1),
    (1, 0),
    (1, 1),
];

/// Row-sum tolerance for `A_**`.
pub const ROW_SUM_TOL: f64 = 1e-12;

pub(crate) fn slot(i: i32, j: i32) -> usize {
    assert!((-1..=1).contains(&i) && (-1..=1).contains(&j), "step out of range");
    ((i + 1) * 3 + (j + 1)) as usize
}

/// A 2d-MMRW kernel: nonnegative blocks `A[i,j]`, `i, j in {-1,0,1}`,
/// whose sum is stochastic. Phases are indexed `0..s0`.
#[derive(Debug, Clone, PartialEq)]
pub struct MMRWModel {
    s0: usize,
    blocks: Vec<Matrix>,
}

impl MMRWModel {
    /// Builds a model from `(step, block)` pairs; omitted steps are zero.
    pub fn new<I>(s0: usize, blocks: I) -> Result<Self>
    where
        I: IntoIterator<Item = ((i32, i32), Matrix)>,
    {
        if s0 == 0 {
            return Err(Error::InvalidModel("s0 must be positive".into()));
        }
        let mut all = vec![Matrix::zeros(s0, s0); 9];
        for ((i, j), b) in blocks {
            if !(-1..=1).contains(&i) || !(-1..=1).contains(&j) {
                return Err(Error::InvalidModel(format!("step ({i},{j}) is not skip-free")));
            }
            if b.nrows() != s0 || b.ncols() != s0 {
                return Err(Error::InvalidModel(format!(
                    "block ({i},{j}) is {}x{}, expected {s0}x{s0}",
                    b.nrows(),
                    b.ncols()
                )));
            }
            if let Some(x) = b.iter().find(|x| !(x.is_finite() && (0.0..=1.0).contains(*x))) {
                return Err(Error::InvalidModel(format!(
                    "block ({i},{j}) has entry {x} outside [0,1]"
                )));
            }
            all[slot(i, j)] = b;
        }
        let model = MMRWModel { s0, blocks: all };
        let total = model.total();
        for r in 0..s0 {
            let sum: f64 = total.row(r).sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::InvalidModel(format!(
                    "not stochastic: row {} of A_** sums to {sum}",
                    r + 1
                )));
            }
        }
        Ok(model)
    }

    pub fn s0(&self) -> usize {
        self.s0
    }

    pub fn block(&self, i: i32, j: i32) -> &Matrix {
        &self.blocks[slot(i, j)]
    }

    /// Steps whose block has at least one positive entry.
    pub fn nonzero_steps(&self) -> impl Iterator<Item = ((i32, i32), &Matrix)> + '_ {
        STEPS
            .iter()
            .map(move |&s| (s, self.block(s.0, s.1)))
            .filter(|(_, b)| b.iter().any(|&x| x > 0.0))
    }

    /// `A_**`, the background transition matrix.
    pub fn total(&self) -> Matrix {
        self.blocks.iter().fold(Matrix::zeros(self.s0, self.s0), |acc, b| acc + b)
    }

    /// `A_{i,*} = sum_j A[i,j]`.
    pub fn row_step_sum(&self, i: i32) -> Matrix {
        (-1..=1).fold(Matrix::zeros(self.s0, self.s0), |acc, j| acc + self.block(i, j))
    }

    /// `A_{*,j} = sum_i A[i,j]`.
    pub fn col_step_sum(&self, j: i32) -> Matrix {
        (-1..=1).fold(Matrix::zeros(self.s0, self.s0), |acc, i| acc + self.block(i, j))
    }

    /// JSON model file with the nonzero blocks in canonical order.
    pub fn to_json(&self) -> String {
        let mut blocks = Map::new();
        for ((i, j), b) in self.nonzero_steps() {
            let rows: Vec<Value> = (0..self.s0)
                .map(|r| Value::Array((0..self.s0).map(|c| Value::from(b[(r, c)])).collect()))
                .collect();
            blocks.insert(format!("{i},{j}"), Value::Array(rows));
        }
        let mut root = Map::new();
        root.insert("s0".into(), Value::from(self.s0));
        root.insert("blocks".into(), Value::Object(blocks));
        serde_json::to_string_pretty(&Value::Object(root)).expect("serializable")
    }
}

/// Parses a model file: `{"s0": n, "blocks": {"i,j": [[..]], ..}}`.
/// Entries may be JSON numbers or decimal strings.
pub fn parse_model(text: &str) -> Result<MMRWModel> {
    let root: Value = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let obj = root.as_object().ok_or_else(|| schema("<root>", "expected an object"))?;
    if let Some(k) = obj.keys().find(|k| *k != "s0" && *k != "blocks") {
        return Err(schema(k, "unknown key"));
    }
    let s0 = obj
        .get("s0")
        .and_then(Value::as_u64)
        .filter(|&n| n > 0)
        .ok_or_else(|| schema("s0", "expected a positive integer"))? as usize;
    let blocks = obj
        .get("blocks")
        .and_then(Value::as_object)
        .ok_or_else(|| schema("blocks", "expected an object"))?;

    let mut parsed = Vec::new();
    for (key, value) in blocks {
        let field = format!("blocks.{key}");
        let step = parse_step(key).ok_or_else(|| schema(&field, "key must be \"i,j\" with i,j in {-1,0,1}"))?;
        let rows = value
            .as_array()
            .filter(|r| r.len() == s0)
            .ok_or_else(|| schema(&field, &format!("expected {s0} rows")))?;
        let mut m = Matrix::zeros(s0, s0);
        for (r, row) in rows.iter().enumerate() {
            let row = row
                .as_array()
                .filter(|c| c.len() == s0)
                .ok_or_else(|| schema(&format!("{field}[{r}]"), &format!("expected {s0} entries")))?;
            for (c, x) in row.iter().enumerate() {
                m[(r, c)] = parse_entry(x)
                    .ok_or_else(|| schema(&format!("{field}[{r}][{c}]"), "expected a decimal"))?;
            }
        }
        parsed.push((step, m));
    }
    MMRWModel::new(s0, parsed)
}

fn schema(field: &str, message: &str) -> Error {
    Error::Schema {
        field: field.to_string(),
        message: message.to_string(),
    }
}

fn parse_step(key: &str) -> Option<(i32, i32)> {
    let (a, b) = key.split_once(',')?;
    let i: i32 = a.trim().parse().ok()?;
    let j: i32 = b.trim().parse().ok()?;
    ((-1..=1).contains(&i) && (-1..=1).contains(&j)).then_some((i, j))
}

fn parse_entry(x: &Value) -> Option<f64> {
    match x {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => s.trim().parse().ok(),
        _ => None,
    }
}

/// Mean increment per step under the stationary background law.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftVector {
    pub a1: f64,
    pub a2: f64,
    pub pi: DVector<f64>,
}

/// Stationary distribution of `A_**` and the drift `(a1, a2)`.
pub fn drift(model: &MMRWModel) -> Result<DriftVector> {
    let n = model.s0();
    let total = model.total();
    let mut m = total.transpose() - Matrix::identity(n, n);
    m.row_mut(n - 1).fill(1.0);
    let mut rhs = DVector::zeros(n);
    rhs[n - 1] = 1.0;
    let pi = m.lu().solve(&rhs).ok_or(Error::ReducibleBackground)?;
    let balance = (pi.transpose() * &total - pi.transpose()).amax();
    if pi.iter().any(|&p| !p.is_finite() || p < -1e-12) || balance > 1e-10 {
        return Err(Error::ReducibleBackground);
    }
    let pi = pi.map(|p| p.max(0.0));
    let ones = DVector::from_element(n, 1.0);
    let a1 = (pi.transpose() * (model.row_step_sum(1) - model.row_step_sum(-1)) * &ones)[0];
    let a2 = (pi.transpose() * (model.col_step_sum(1) - model.col_step_sum(-1)) * &ones)[0];
    Ok(DriftVector { a1, a2, pi })
}

/// Refuses models where neither drift component is negative.
pub fn require_negative_drift(model: &MMRWModel) -> Result<DriftVector> {
    let d = drift(model)?;
    if d.a1 < 0.0 || d.a2 < 0.0 {
        Ok(d)
    } else {
        Err(Error::DriftAssumption { a1: d.a1, a2: d.a2 })
    }
}

/// Exchanges the two coordinates: `A'[i,j] = A[j,i]`.
pub fn swap_axes(model: &MMRWModel) -> MMRWModel {
    let blocks = STEPS.iter().map(|&(i, j)| model.block(j, i).clone()).collect();
    MMRWModel {
        s0: model.s0,
        blocks,
    }
}

/// Heuristic diagnostics for irreducibility, aperiodicity and drift.
/// Reachability results are hints computed on finite windows, not proofs.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub stochastic: bool,
    pub aperiodic_hint: bool,
    pub p_irreducible_hint: bool,
    pub p_plus_irreducible_hint: bool,
    /// `None` when `A_**` has no unique stationary distribution.
    pub drift: Option<DriftVector>,
    pub negative_drift: bool,
    pub window_size: usize,
}

pub fn validate(model: &MMRWModel, window: usize) -> ValidationReport {
    let window = window.max(1);
    let total = model.total();
    let stochastic = (0..model.s0()).all(|r| (total.row(r).sum() - 1.0).abs() <= ROW_SUM_TOL);
    let drift = drift(model).ok();
    let negative_drift = drift.as_ref().is_some_and(|d| d.a1 < 0.0 || d.a2 < 0.0);
    ValidationReport {
        stochastic,
        aperiodic_hint: aperiodic_hint(model),
        p_irreducible_hint: torus_irreducible(model, window),
        p_plus_irreducible_hint: quadrant_irreducible(model, window),
        drift,
        negative_drift,
        window_size: window,
    }
}

fn strongly_connected(nodes: usize, edges: &[(u32, u32)]) -> bool {
    let mut g = DiGraph::<(), ()>::with_capacity(nodes, edges.len());
    for _ in 0..nodes {
        g.add_node(());
    }
    g.extend_with_edges(edges);
    kosaraju_scc(&g).len() == 1
}

fn torus_irreducible(model: &MMRWModel, window: usize) -> bool {
    let m = (2 * window + 1) as i64;
    let s0 = model.s0();
    let idx = |x: i64, y: i64, j: usize| ((x.rem_euclid(m) * m + y.rem_euclid(m)) as usize * s0 + j) as u32;
    let mut edges = Vec::new();
    for x in 0..m {
        for y in 0..m {
            for ((di, dj), b) in model.nonzero_steps() {
                for (r, c) in positive_entries(b) {
                    edges.push((idx(x, y, r), idx(x + di as i64, y + dj as i64, c)));
                }
            }
        }
    }
    strongly_connected((m * m) as usize * s0, &edges)
}

fn quadrant_irreducible(model: &MMRWModel, window: usize) -> bool {
    let w = window as i64;
    let s0 = model.s0();
    let idx = |x: i64, y: i64, j: usize| ((x * (w + 1) + y) as usize * s0 + j) as u32;
    let mut edges = Vec::new();
    for x in 0..=w {
        for y in 0..=w {
            for ((di, dj), b) in model.nonzero_steps() {
                let (tx, ty) = (x + di as i64, y + dj as i64);
                if !(0..=w).contains(&tx) || !(0..=w).contains(&ty) {
                    continue;
                }
                for (r, c) in positive_entries(b) {
                    edges.push((idx(x, y, r), idx(tx, ty, c)));
                }
            }
        }
    }
    strongly_connected(((w + 1) * (w + 1)) as usize * s0, &edges)
}

/// gcd of lengths of closed walks on the lattice (net displacement zero,
/// same phase) of length at most `2 s0 + 4`, started from every phase.
fn aperiodic_hint(model: &MMRWModel) -> bool {
    let max_len = 2 * model.s0() + 4;
    let mut g = 0usize;
    for start in 0..model.s0() {
        let mut frontier: HashSet<(i32, i32, usize)> = HashSet::from([(0, 0, start)]);
        for len in 1..=max_len {
            let mut next = HashSet::new();
            for &(x, y, r) in &frontier {
                for ((di, dj), b) in model.nonzero_steps() {
                    for c in 0..model.s0() {
                        if b[(r, c)] > 0.0 {
                            next.insert((x + di, y + dj, c));
                        }
                    }
                }
            }
            if next.contains(&(0, 0, start)) {
                g = gcd(g, len);
            }
            frontier = next;
        }
    }
    g == 1
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn positive_entries(b: &Matrix) -> impl Iterator<Item = (usize, usize)> + '_ {
    (0..b.nrows()).flat_map(move |r| (0..b.ncols()).filter(move |&c| b[(r, c)] > 0.0).map(move |c| (r, c)))
}

/// Reference models used throughout the tests and documentation.
pub mod reference {
    use super::*;

    /// Scalar (`s0 = 1`) walk from step probabilities.
    pub fn scalar(probs: &[((i32, i32), f64)]) -> Result<MMRWModel> {
        MMRWModel::new(1, probs.iter().map(|&(s, p)| (s, DMatrix::from_element(1, 1, p))))
    }

    /// Blocks `p[i,j] * t` for a scalar walk `p` and a stochastic matrix `t`.
    pub fn modulated(base: &MMRWModel, t: &Matrix) -> Result<MMRWModel> {
        assert_eq!(base.s0(), 1, "modulated expects a scalar base walk");
        MMRWModel::new(
            t.nrows(),
            STEPS.iter().map(|&(i, j)| ((i, j), t * base.block(i, j)[(0, 0)])),
        )
    }

    /// Deterministic `(-1,-1)` step.
    pub fn r0() -> MMRWModel {
        scalar(&[((-1, -1), 1.0)]).expect("valid")
    }

    /// Symmetric axis walk with drift `(-0.2, -0.2)`.
    pub fn r1() -> MMRWModel {
        scalar(&[
            ((-1, 0), 0.3),
            ((1, 0), 0.1),
            ((0, -1), 0.3),
            ((0, 1), 0.1),
            ((0, 0), 0.2),
        ])
        .expect("valid")
    }

    /// `r1` modulated by a two-state symmetric background chain.
    pub fn r2() -> MMRWModel {
        let t = DMatrix::from_row_slice(2, 2, &[0.9, 0.1, 0.1, 0.9]);
        modulated(&r1(), &t).expect("valid")
    }
}
