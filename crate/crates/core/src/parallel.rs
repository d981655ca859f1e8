//! Fixed-order parallel reductions.
//!
//! Work is cut into chunks of a fixed size independent of the thread
//! count; chunk partials are combined sequentially in chunk order, so
//! floating point sums are bitwise reproducible for any worker count.

use std::ops::Range;

use rayon::prelude::*;

pub const CHUNK: usize = 2048;

/// Sums per-chunk accumulators of length `width` over `0..n`.
pub fn chunked_sums<F>(n: usize, width: usize, f: F) -> Vec<f64>
where
    F: Fn(Range<usize>, &mut [f64]) + Sync,
{
    let chunks = n.div_ceil(CHUNK);
    let partials: Vec<Vec<f64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = vec![0.0; width];
            f(c * CHUNK..((c + 1) * CHUNK).min(n), &mut acc);
            acc
        })
        .collect();
    let mut total = vec![0.0; width];
    for p in partials {
        for (t, x) in total.iter_mut().zip(p) {
            *t += x;
        }
    }
    total
}

/// Reads `PROPCAL_WORKERS` and sizes the global pool; ignored if already set.
pub fn init_from_env() {
    if let Some(n) = std::env::var("PROPCAL_WORKERS")
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|n| *n > 0)
    {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}
