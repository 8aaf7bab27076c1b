//! Monte Carlo estimates of the occupation measure.
//!
//! Paths are grouped in fixed batches; batch `b` draws from
//! `ChaCha8Rng::seed_from_u64(seed)` on stream `b`, and tallies are integer
//! sums, so estimates do not depend on scheduling or on the worker count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::State;
use crate::model::{require_negative_drift, MMRWModel};
use crate::{Error, Result};

const BATCH: u64 = 1024;
/// Two-sided 99% standard normal quantile.
const Z99: f64 = 2.5758293035489004;
/// Fraction of capped paths above which the estimate carries a warning.
const CAP_WARN_FRACTION: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct SimulationOptions {
    pub n_paths: u64,
    pub seed: u64,
    pub truncation: usize,
    pub workers: usize,
    pub step_cap: u64,
}

impl SimulationOptions {
    pub fn new(n_paths: u64, seed: u64, truncation: usize) -> Self {
        SimulationOptions {
            n_paths,
            seed,
            truncation,
            workers: rayon::current_num_threads(),
            step_cap: 1_000_000,
        }
    }
}

/// Sample means of visit counts on `[0,L]^2 x S0` with 99% CI half-widths,
/// laid out like `OccupationTable::values`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationEstimate {
    pub origin: State,
    pub truncation: usize,
    pub s0: usize,
    pub mean: Vec<f64>,
    pub half_width: Vec<f64>,
    pub n_paths: u64,
    pub seed: u64,
    pub workers: usize,
    /// Paths stopped by the step cap before leaving the quadrant.
    pub capped_paths: u64,
    pub cap_warning: bool,
}

impl SimulationEstimate {
    pub fn index(&self, x1: usize, x2: usize, j: usize) -> usize {
        (x1 * (self.truncation + 1) + x2) * self.s0 + j
    }
}

pub fn simulate_occupation(model: &MMRWModel, origin: State, n_paths: u64, seed: u64, l: usize) -> Result<SimulationEstimate> {
    simulate_occupation_with(model, origin, &SimulationOptions::new(n_paths, seed, l))
}

struct Tally {
    counts: Vec<u64>,
    squares: Vec<u64>,
    capped: u64,
}

impl Tally {
    fn new(n: usize) -> Self {
        Tally {
            counts: vec![0; n],
            squares: vec![0; n],
            capped: 0,
        }
    }

    fn merge(mut self, other: Tally) -> Tally {
        for (a, b) in self.counts.iter_mut().zip(other.counts) {
            *a += b;
        }
        for (a, b) in self.squares.iter_mut().zip(other.squares) {
            *a += b;
        }
        self.capped += other.capped;
        self
    }
}

/// Cumulative transition table per phase: `(cum, d1, d2, next phase)`.
fn transition_table(model: &MMRWModel) -> Vec<Vec<(f64, i64, i64, usize)>> {
    (0..model.s0())
        .map(|r| {
            let mut cum = 0.0;
            let mut row = Vec::new();
            for ((d1, d2), b) in model.nonzero_steps() {
                for c in 0..model.s0() {
                    if b[(r, c)] > 0.0 {
                        cum += b[(r, c)];
                        row.push((cum, d1 as i64, d2 as i64, c));
                    }
                }
            }
            if let Some(last) = row.last_mut() {
                last.0 = f64::INFINITY;
            }
            row
        })
        .collect()
}

pub fn simulate_occupation_with(model: &MMRWModel, origin: State, opts: &SimulationOptions) -> Result<SimulationEstimate> {
    require_negative_drift(model)?;
    let (l, s0) = (opts.truncation, model.s0());
    if origin.phase >= s0 || origin.x1 > l || origin.x2 > l {
        return Err(Error::InvalidArgument("origin outside the truncation box".into()));
    }
    if opts.n_paths < 2 || opts.workers == 0 {
        return Err(Error::InvalidArgument("need at least 2 paths and 1 worker".into()));
    }
    let table = transition_table(model);
    let size = (l + 1) * (l + 1) * s0;
    let side = l as i64 + 1;
    let batches = opts.n_paths.div_ceil(BATCH);

    let run_batch = |mut acc: Tally, b: u64| -> Tally {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        rng.set_stream(b);
        let paths = BATCH.min(opts.n_paths - b * BATCH);
        let mut visits = vec![0u64; size];
        let mut touched = Vec::new();
        for _ in 0..paths {
            let (mut x1, mut x2, mut j) = (origin.x1 as i64, origin.x2 as i64, origin.phase);
            let mut steps = 0u64;
            while x1 >= 0 && x2 >= 0 {
                if x1 < side && x2 < side {
                    let k = ((x1 * side + x2) as usize) * s0 + j;
                    if visits[k] == 0 {
                        touched.push(k);
                    }
                    visits[k] += 1;
                }
                if steps == opts.step_cap {
                    acc.capped += 1;
                    break;
                }
                let u: f64 = rng.random();
                let &(_, d1, d2, c) = table[j].iter().find(|t| u < t.0).expect("stochastic row");
                x1 += d1;
                x2 += d2;
                j = c;
                steps += 1;
            }
            for k in touched.drain(..) {
                let v = std::mem::take(&mut visits[k]);
                acc.counts[k] += v;
                acc.squares[k] += v * v;
            }
        }
        acc
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    let tally = pool.install(|| {
        (0..batches)
            .into_par_iter()
            .fold(|| Tally::new(size), run_batch)
            .reduce(|| Tally::new(size), Tally::merge)
    });

    let n = opts.n_paths as f64;
    let mean: Vec<f64> = tally.counts.iter().map(|&c| c as f64 / n).collect();
    let half_width = tally
        .counts
        .iter()
        .zip(&tally.squares)
        .map(|(&c, &s)| {
            let (c, s) = (c as f64, s as f64);
            let var = ((s - c * c / n) / (n - 1.0)).max(0.0);
            Z99 * (var / n).sqrt()
        })
        .collect();
    Ok(SimulationEstimate {
        origin,
        truncation: l,
        s0,
        mean,
        half_width,
        n_paths: opts.n_paths,
        seed: opts.seed,
        workers: opts.workers,
        capped_paths: tally.capped,
        cap_warning: tally.capped as f64 > CAP_WARN_FRACTION * n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::reference::{r0, r1};
    use crate::occupation::truncated_fundamental;

    #[test]
    fn r0_paths_are_deterministic() {
        let e = simulate_occupation(&r0(), State::new(2, 3, 0), 1000, 7, 6).unwrap();
        for x1 in 0..=6 {
            for x2 in 0..=6 {
                let k = e.index(x1, x2, 0);
                let on = matches!((x1, x2), (2, 3) | (1, 2) | (0, 1));
                assert_eq!(e.mean[k], if on { 1.0 } else { 0.0 });
                assert_eq!(e.half_width[k], 0.0);
            }
        }
        assert!(!e.cap_warning);
    }

    #[test]
    fn worker_count_does_not_change_estimates() {
        let mut o = SimulationOptions::new(5000, 42, 10);
        o.workers = 1;
        let a = simulate_occupation_with(&r1(), State::new(0, 0, 0), &o).unwrap();
        o.workers = 4;
        let b = simulate_occupation_with(&r1(), State::new(0, 0, 0), &o).unwrap();
        assert_eq!(a.mean, b.mean);
        assert_eq!(a.half_width, b.half_width);
        o.seed = 43;
        let c = simulate_occupation_with(&r1(), State::new(0, 0, 0), &o).unwrap();
        assert_ne!(a.mean, c.mean);
    }

    #[test]
    fn step_cap_warns() {
        let mut o = SimulationOptions::new(100, 1, 10);
        o.step_cap = 1;
        let e = simulate_occupation_with(&r1(), State::new(5, 5, 0), &o).unwrap();
        assert!(e.cap_warning && e.capped_paths > 0);
    }

    #[test]
    fn agrees_with_the_linear_solve() {
        let o = State::new(0, 0, 0);
        let t = truncated_fundamental(&r1(), o, 20).unwrap();
        let e = simulate_occupation(&r1(), o, 100_000, 3, 20).unwrap();
        for (k, &m) in e.mean.iter().enumerate() {
            let q = t.values()[k];
            if q >= 1e-2 {
                assert!((m - q).abs() <= 3.0 * e.half_width[k] + 1e-12, "{k}: {m} vs {q}");
            }
        }
    }
}
