//! Occupation measures before the first exit from the quadrant: truncated
//! fundamental-matrix solves, Monte Carlo estimates and derived quantities.

mod simulate;

pub use simulate::{simulate_occupation, simulate_occupation_with, SimulationEstimate, SimulationOptions};

use crate::decay::{gcd, Direction};
use crate::model::{require_negative_drift, MMRWModel};
use crate::{Error, Matrix, Result};

/// Default truncation level.
pub const DEFAULT_TRUNCATION: usize = 64;
/// Relative per-entry update at which the sweep iteration stops.
const SWEEP_TOL: f64 = 1e-14;
const MAX_SWEEPS: usize = 1_000_000;
/// Entries below this are ignored by the stopping rule.
const TINY: f64 = 1e-290;
/// Values below this are treated as underflow by [`empirical_decay`].
pub const UNDERFLOW: f64 = 1e-250;
/// Margin between the longest ray and the truncation edge.
pub const RAY_MARGIN: usize = 3;

/// A state `(x1, x2, phase)` of the quadrant; phases are 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct State {
    pub x1: usize,
    pub x2: usize,
    pub phase: usize,
}

impl State {
    pub fn new(x1: usize, x2: usize, phase: usize) -> Self {
        State { x1, x2, phase }
    }
}

/// Expected visit counts on `[0,L]^2 x S0` from one origin, with mass
/// leaving the box killed.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupationTable {
    origin: State,
    truncation: usize,
    s0: usize,
    values: Vec<f64>,
    /// Transitions leaving `[0,L]^2` are killed rather than reflected.
    pub exit_mass_absorbed: bool,
    sweeps: usize,
    residual: f64,
}

impl OccupationTable {
    pub fn origin(&self) -> State {
        self.origin
    }

    pub fn truncation(&self) -> usize {
        self.truncation
    }

    pub fn s0(&self) -> usize {
        self.s0
    }

    pub fn index(&self, x1: usize, x2: usize, j: usize) -> usize {
        (x1 * (self.truncation + 1) + x2) * self.s0 + j
    }

    /// `q~` at `(x1, x2, j)`; zero outside the box.
    pub fn get(&self, x1: usize, x2: usize, j: usize) -> f64 {
        if x1 > self.truncation || x2 > self.truncation || j >= self.s0 {
            return 0.0;
        }
        self.values[self.index(x1, x2, j)]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Truncated expected exit time.
    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn sweeps(&self) -> usize {
        self.sweeps
    }

    /// Max-norm of `n - e - n P`, relative to the largest entry.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// `(x1, x2, j, value)` in storage order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, usize, f64)> + '_ {
        let (l, s0) = (self.truncation + 1, self.s0);
        self.values.iter().enumerate().map(move |(k, &v)| (k / s0 / l, (k / s0) % l, k % s0, v))
    }
}

/// Nonzero step blocks, flattened row-major.
struct Stencil {
    s0: usize,
    steps: Vec<(i64, i64, Vec<f64>)>,
}

impl Stencil {
    fn new(model: &MMRWModel) -> Self {
        let s0 = model.s0();
        let steps = model
            .nonzero_steps()
            .map(|((i, j), b)| (i as i64, j as i64, b.transpose().as_slice().to_vec()))
            .collect();
        Stencil { s0, steps }
    }

    /// `out = e + n P` on the killed box `[0,L]^2`.
    fn apply(&self, n: &[f64], e: usize, l: usize, out: &mut [f64]) {
        let s0 = self.s0;
        let side = l as i64 + 1;
        out.fill(0.0);
        out[e] = 1.0;
        for x1 in 0..side {
            for x2 in 0..side {
                let src = ((x1 * side + x2) as usize) * s0;
                let v = &n[src..src + s0];
                if v.iter().all(|&x| x == 0.0) {
                    continue;
                }
                for (d1, d2, b) in &self.steps {
                    let (t1, t2) = (x1 + d1, x2 + d2);
                    if t1 < 0 || t2 < 0 || t1 >= side || t2 >= side {
                        continue;
                    }
                    let dst = ((t1 * side + t2) as usize) * s0;
                    for r in 0..s0 {
                        if v[r] == 0.0 {
                            continue;
                        }
                        for c in 0..s0 {
                            out[dst + c] += v[r] * b[r * s0 + c];
                        }
                    }
                }
            }
        }
    }
}

/// Solves `n = e_origin + n P_L` by the sweep iteration `n <- e + n P_L`,
/// stopping when every entry above `1e-290` changes by at most `1e-14`
/// relative.
pub fn truncated_fundamental(model: &MMRWModel, origin: State, l: usize) -> Result<OccupationTable> {
    require_negative_drift(model)?;
    solve_unchecked(model, origin, l)
}

fn solve_unchecked(model: &MMRWModel, origin: State, l: usize) -> Result<OccupationTable> {
    let s0 = model.s0();
    if l == 0 || origin.x1 > l || origin.x2 > l || origin.phase >= s0 {
        return Err(Error::InvalidArgument(format!(
            "origin ({},{},{}) is outside [0,{l}]^2 x {{1..{s0}}}",
            origin.x1,
            origin.x2,
            origin.phase + 1
        )));
    }
    let stencil = Stencil::new(model);
    let size = (l + 1) * (l + 1) * s0;
    let e = (origin.x1 * (l + 1) + origin.x2) * s0 + origin.phase;
    let mut n = vec![0.0; size];
    let mut next = vec![0.0; size];
    let mut sweeps = 0;
    loop {
        stencil.apply(&n, e, l, &mut next);
        sweeps += 1;
        let settled = n
            .iter()
            .zip(&next)
            .all(|(&a, &b)| b <= TINY || (b - a).abs() <= SWEEP_TOL * b);
        std::mem::swap(&mut n, &mut next);
        if settled {
            break;
        }
        if sweeps >= MAX_SWEEPS {
            return Err(Error::NoConvergence {
                what: "truncated_fundamental",
                iterations: sweeps,
                detail: format!("L={l}"),
            });
        }
    }
    stencil.apply(&n, e, l, &mut next);
    let scale = n.iter().cloned().fold(0.0, f64::max);
    let residual = n.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / scale;
    if residual > 1e-12 {
        return Err(Error::NoConvergence {
            what: "truncated_fundamental",
            iterations: sweeps,
            detail: format!("relative residual {residual:e}"),
        });
    }
    Ok(OccupationTable {
        origin,
        truncation: l,
        s0,
        values: n,
        exit_mass_absorbed: true,
        sweeps,
        residual,
    })
}

/// Tables from `(x1, x2, j)` for every phase `j`.
pub fn truncated_fundamental_block(model: &MMRWModel, x1: usize, x2: usize, l: usize) -> Result<Vec<OccupationTable>> {
    require_negative_drift(model)?;
    (0..model.s0())
        .map(|j| solve_unchecked(model, State::new(x1, x2, j), l))
        .collect()
}

/// Successive log-ratios along a ray of the occupation measure.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDecay {
    /// `(k, r_k)` with `r_k = -log(q~_{(k+1)c} / q~_{kc})`.
    pub ratios: Vec<(usize, f64)>,
    /// `r_{k_max - 1}` when available.
    pub tail: Option<f64>,
    /// Set when the range was cut short by underflow.
    pub warning: Option<String>,
}

/// Log-ratios `r_k`, `k_min <= k < k_max`, of `q~` along `(c1 k, c2 k, j_to)`
/// from an origin on an axis.
pub fn empirical_decay(
    model: &MMRWModel,
    origin: State,
    c: [u32; 2],
    j_to: usize,
    k_min: usize,
    k_max: usize,
    l: usize,
) -> Result<EmpiricalDecay> {
    check_ray(origin, c, k_min, k_max, l)?;
    let table = truncated_fundamental(model, origin, l)?;
    empirical_decay_from(&table, c, j_to, k_min, k_max)
}

fn check_ray(origin: State, c: [u32; 2], k_min: usize, k_max: usize, l: usize) -> Result<()> {
    if origin.x1 != 0 && origin.x2 != 0 {
        return Err(Error::InvalidArgument("origin must lie on an axis (x1 = 0 or x2 = 0)".into()));
    }
    if c == [0, 0] {
        return Err(Error::InvalidArgument("ray direction must be nonzero".into()));
    }
    if k_min >= k_max {
        return Err(Error::InvalidArgument(format!("need k_min < k_max, got {k_min}..{k_max}")));
    }
    let reach = (k_max + 1) * c[0].max(c[1]) as usize;
    if reach + RAY_MARGIN >= l {
        return Err(Error::InvalidArgument(format!(
            "ray reaches {reach}; truncation L={l} must exceed it by more than {RAY_MARGIN}"
        )));
    }
    Ok(())
}

/// [`empirical_decay`] on an existing table.
pub fn empirical_decay_from(
    table: &OccupationTable,
    c: [u32; 2],
    j_to: usize,
    k_min: usize,
    k_max: usize,
) -> Result<EmpiricalDecay> {
    let o = table.origin();
    check_ray(o, c, k_min, k_max, table.truncation())?;
    if j_to >= table.s0() {
        return Err(Error::InvalidArgument(format!("phase {} out of range", j_to + 1)));
    }
    let q = |k: usize| table.get(c[0] as usize * k, c[1] as usize * k, j_to);
    let mut ratios = Vec::new();
    let mut warning = None;
    for k in k_min..k_max {
        let (a, b) = (q(k), q(k + 1));
        if a < UNDERFLOW || b < UNDERFLOW {
            warning = Some(format!("occupation underflows below {UNDERFLOW:e} at k={}; range truncated", if a < UNDERFLOW { k } else { k + 1 }));
            break;
        }
        ratios.push((k, -(b / a).ln()));
    }
    let tail = ratios.last().filter(|(k, _)| *k + 1 == k_max).map(|&(_, r)| r);
    Ok(EmpiricalDecay { ratios, tail, warning })
}

/// `sum_k e^{<k, theta>} N_{x,k}` over the box, from the tables of
/// [`truncated_fundamental_block`] (row = start phase).
pub fn mgf_partial_from(tables: &[OccupationTable], theta: [f64; 2]) -> Result<Matrix> {
    let s0 = tables.len();
    let mut m = Matrix::zeros(s0, s0);
    for (j, t) in tables.iter().enumerate() {
        for (x1, x2, jp, v) in t.iter() {
            if v != 0.0 {
                m[(j, jp)] += (x1 as f64 * theta[0] + x2 as f64 * theta[1]).exp() * v;
            }
        }
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::Overflow("mgf_partial".into()));
    }
    Ok(m)
}

/// Truncated matrix moment generating function of the occupation measure
/// from `(x1, x2)`.
pub fn mgf_partial(model: &MMRWModel, origin: (usize, usize), theta: [f64; 2], l: usize) -> Result<Matrix> {
    mgf_partial_from(&truncated_fundamental_block(model, origin.0, origin.1, l)?, theta)
}

/// Max-norm of
/// `Phi+ (I - C) + Phi1 (I - C1) + Phi2 (I - C2) + N00 (I - C0) - z^x1 w^x2 I`
/// at `z = e^theta1`, `w = e^theta2`, assembled from truncated tables.
pub fn functional_equation_residual_from(model: &MMRWModel, tables: &[OccupationTable], theta: [f64; 2]) -> Result<f64> {
    let s0 = model.s0();
    let mut phi_plus = Matrix::zeros(s0, s0);
    let mut phi1 = Matrix::zeros(s0, s0);
    let mut phi2 = Matrix::zeros(s0, s0);
    let mut n00 = Matrix::zeros(s0, s0);
    for (j, t) in tables.iter().enumerate() {
        for (x1, x2, jp, v) in t.iter() {
            if v == 0.0 {
                continue;
            }
            let w = (x1 as f64 * theta[0] + x2 as f64 * theta[1]).exp() * v;
            let target = match (x1 > 0, x2 > 0) {
                (true, true) => &mut phi_plus,
                (true, false) => &mut phi1,
                (false, true) => &mut phi2,
                (false, false) => &mut n00,
            };
            target[(j, jp)] += w;
        }
    }
    let kernel = |is: &[i32], js: &[i32]| -> Result<Matrix> {
        let mut m = Matrix::zeros(s0, s0);
        for &i in is {
            for &j in js {
                m += model.block(i, j) * (i as f64 * theta[0] + j as f64 * theta[1]).exp();
            }
        }
        Ok(m)
    };
    let all = [-1, 0, 1];
    let up = [0, 1];
    let id = Matrix::identity(s0, s0);
    let origin = tables.first().map(|t| t.origin()).ok_or_else(|| Error::InvalidArgument("no tables".into()))?;
    let lhs = &phi_plus * (&id - kernel(&all, &all)?)
        + &phi1 * (&id - kernel(&all, &up)?)
        + &phi2 * (&id - kernel(&up, &all)?)
        + &n00 * (&id - kernel(&up, &up)?)
        - &id * (origin.x1 as f64 * theta[0] + origin.x2 as f64 * theta[1]).exp();
    let r = lhs.amax();
    if !r.is_finite() {
        return Err(Error::Overflow("functional equation residual".into()));
    }
    Ok(r)
}

pub fn functional_equation_residual(model: &MMRWModel, origin: (usize, usize), theta: [f64; 2], l: usize) -> Result<f64> {
    let tables = truncated_fundamental_block(model, origin.0, origin.1, l)?;
    functional_equation_residual_from(model, &tables, theta)
}

/// Lattice points of the marginal sum at level `k`: for `c1 <= c2` the
/// points `(k - (c2/c1) l, l)` with `c2 l <= c1 k` and `c1 | c2 l`; the
/// roles of the axes are exchanged otherwise.
pub fn index_set(c: Direction, k: usize) -> Result<Vec<(usize, usize)>> {
    if gcd(c.c1, c.c2) != 1 {
        return Err(Error::InvalidArgument(format!(
            "marginal sums need mutually prime components, got ({},{})",
            c.c1, c.c2
        )));
    }
    let (a, b) = (c.c1 as usize, c.c2 as usize);
    let swap = a > b;
    let (a, b) = if swap { (b, a) } else { (a, b) };
    let pts = (0..=a * k / b)
        .filter(|l| (b * l) % a == 0)
        .map(|l| (k - b * l / a, l))
        .map(|(x, y)| if swap { (y, x) } else { (x, y) })
        .collect();
    Ok(pts)
}

/// Sum of `q~` over [`index_set`] at level `k` in phase `j_to`.
pub fn marginal_occupation_sum_from(table: &OccupationTable, c: Direction, j_to: usize, k: usize) -> Result<f64> {
    if k > table.truncation() {
        return Err(Error::InvalidArgument(format!("level {k} exceeds truncation {}", table.truncation())));
    }
    Ok(index_set(c, k)?.into_iter().map(|(x1, x2)| table.get(x1, x2, j_to)).sum())
}

pub fn marginal_occupation_sum(
    model: &MMRWModel,
    origin: State,
    c: Direction,
    j_to: usize,
    k: usize,
    l: usize,
) -> Result<f64> {
    index_set(c, k)?;
    marginal_occupation_sum_from(&truncated_fundamental(model, origin, l)?, c, j_to, k)
}
