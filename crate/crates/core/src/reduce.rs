//! Deterministic parallel reductions.
//!
//! Work is split into fixed-size chunks independent of the thread count;
//! chunk partials are combined in index order, so sums are bitwise
//! reproducible for any pool size. Chunks are summed with Neumaier
//! compensation so energy differences near convergence stay resolvable.

use rayon::prelude::*;

pub const CHUNK: usize = 1024;

/// `sum_{i < len} f(i)` with a thread-count independent summation order.
pub fn det_sum<F>(len: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    let chunks = len.div_ceil(CHUNK);
    let partials: Vec<f64> = (0..chunks)
        .into_par_iter()
        .map(|c| compensated((c * CHUNK..((c + 1) * CHUNK).min(len)).map(&f)))
        .collect();
    compensated(partials.into_iter())
}

/// Neumaier-compensated sum in iteration order.
pub fn compensated(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut carry = 0.0f64;
    for v in values {
        let t = sum + v;
        carry += if sum.abs() >= v.abs() { (sum - t) + v } else { (v - t) + sum };
        sum = t;
    }
    sum + carry
}
