//! Oriented site percolation on `{(m, n) : m + n even, n ≥ 0}` with edges
//! `(m, n) → (m ± 1, n + 1)`.
//!
//! Site `(m, n)` is open iff its uniform `u(m, n) < p`. The uniforms come
//! from one keyed stream per row and do not depend on `p`, so grids built
//! from the same seed at different `p` are coupled. The origin is always
//! open.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimate::{EstimateWithCI, Tally};
use crate::rng::{derive_seed, keyed_stream, StreamTag};

#[derive(Debug, Clone, PartialEq)]
pub struct OPGrid {
    p: f64,
    seed: u64,
    /// Reachable `m` per row, ascending; rows past the death row are absent.
    rows: Vec<Vec<i32>>,
    n_max: u32,
}

/// Uniforms of row `n` for `m = -n, -n + 2, …, n`.
pub fn row_uniforms(seed: u64, n: u32) -> Vec<f64> {
    let mut rng = keyed_stream(seed, StreamTag::Percolation, 0, false, &[n as i32]);
    (0..=n).map(|_| rng.random::<f64>()).collect()
}

pub fn percolate(p: f64, n_max: u32, seed: u64) -> Result<OPGrid> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!(
            "p must lie in [0, 1], got {p}"
        )));
    }
    let mut rows = vec![vec![0]];
    for n in 1..=n_max {
        let prev = rows.last().expect("nonempty");
        if prev.is_empty() {
            break;
        }
        let u = row_uniforms(seed, n);
        let open = |m: i32| u[((m + n as i32) / 2) as usize] < p;
        let mut next: Vec<i32> = Vec::with_capacity(prev.len() + 1);
        for &m in prev {
            for c in [m - 1, m + 1] {
                if next.last().is_none_or(|&l| l < c) && open(c) {
                    next.push(c);
                }
            }
        }
        rows.push(next);
    }
    Ok(OPGrid {
        p,
        seed,
        rows,
        n_max,
    })
}

impl OPGrid {
    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn n_max(&self) -> u32 {
        self.n_max
    }

    /// Reachable sites of row `n`; empty once the cluster has died.
    pub fn reachable(&self, n: u32) -> &[i32] {
        self.rows.get(n as usize).map_or(&[], Vec::as_slice)
    }

    /// First empty row, if any.
    pub fn died_at(&self) -> Option<u32> {
        self.rows.iter().position(Vec::is_empty).map(|n| n as u32)
    }

    pub fn survived(&self) -> bool {
        self.died_at().is_none()
    }

    pub fn left_edge(&self, n: u32) -> Option<i32> {
        self.reachable(n).first().copied()
    }

    pub fn right_edge(&self, n: u32) -> Option<i32> {
        self.reachable(n).last().copied()
    }

    /// Reachable fraction of the correct-parity sites in `[l_n, r_n]`.
    pub fn density_between_edges(&self, n: u32) -> Result<f64> {
        let row = self.reachable(n);
        match (row.first(), row.last()) {
            (Some(&l), Some(&r)) => Ok(row.len() as f64 / ((r - l) / 2 + 1) as f64),
            _ => Err(Error::Precondition(format!("row {n} is empty"))),
        }
    }

    /// Densities of all living rows.
    pub fn densities(&self) -> Vec<f64> {
        (0..self.rows.len() as u32)
            .map_while(|n| self.density_between_edges(n).ok())
            .collect()
    }
}

/// Whether a lower confidence bound for a block probability clears the
/// user-supplied comparison threshold `1 - ε₁`.
pub fn dominate_check(block_p_lower: f64, epsilon1: f64) -> bool {
    block_p_lower >= 1.0 - epsilon1
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub epsilon: f64,
    pub p: f64,
    pub survival: EstimateWithCI,
}

/// Survival to row `rows` at `p = 1 - ε₁` for each `ε₁`, on shared seeds.
pub fn threshold_sweep(
    epsilons: &[f64],
    rows: u32,
    reps: u64,
    seed: u64,
    level: f64,
) -> Result<Vec<SweepRow>> {
    epsilons
        .iter()
        .map(|&eps| {
            let p = 1.0 - eps;
            let t = (0..reps)
                .into_par_iter()
                .map(|i| {
                    percolate(p, rows, derive_seed(seed, 7, i))
                        .map(|g| Tally::from_hits([g.survived()]))
                })
                .try_reduce(Tally::default, |a, b| Ok(a.merge(b)))?;
            Ok(SweepRow {
                epsilon: eps,
                p,
                survival: t.estimate(level),
            })
        })
        .collect()
}
