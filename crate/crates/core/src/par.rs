//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) these fan out over rayon's global
//! pool; without it they run in order on the calling thread. Results are
//! always returned in index order, and floating-point reductions are split
//! into fixed-size chunks whose partials are combined serially, so the
//! output never depends on the number of worker threads.

use std::ops::Range;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Fixed reduction block. Part of the determinism contract: changing it
/// changes the last bits of floating-point sums.
pub const CHUNK: u64 = 4096;

pub fn map_range<T, F>(range: Range<u64>, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        range.into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        range.map(f).collect()
    }
}

pub fn map_slice<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Number of indices in `range` for which `pred` holds.
pub fn count_range<F>(range: Range<u64>, pred: F) -> u64
where
    F: Fn(u64) -> bool + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        range.into_par_iter().filter(|&i| pred(i)).count() as u64
    }
    #[cfg(not(feature = "parallel"))]
    {
        range.filter(|&i| pred(i)).count() as u64
    }
}

/// Split `0..len` into `CHUNK`-sized blocks, evaluate `block` on each, and
/// return the per-block results in order.
pub fn map_chunks<T, F>(len: u64, block: F) -> Vec<T>
where
    T: Send,
    F: Fn(Range<u64>) -> T + Sync + Send,
{
    let blocks = len.div_ceil(CHUNK);
    map_range(0..blocks, |b| {
        let start = b * CHUNK;
        block(start..(start + CHUNK).min(len))
    })
}

/// Deterministic floating-point sum of `term(i)` over `0..len`.
pub fn sum_range<F>(len: u64, term: F) -> f64
where
    F: Fn(u64) -> f64 + Sync + Send,
{
    map_chunks(len, |r| r.map(&term).sum::<f64>()).into_iter().sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn helpers_preserve_order() {
        let v = map_range(0..10_000, |i| i * 3);
        assert!(v.iter().enumerate().all(|(i, &x)| x == 3 * i as u64));
        let blocks = map_chunks(10_000, |r| r.start);
        assert_eq!(blocks, vec![0, 4096, 8192]);
        assert_eq!(count_range(0..1000, |i| i % 7 == 0), 143);
        assert_eq!(map_slice(&[1, 2, 3], |x| x * 2), vec![2, 4, 6]);
    }

    #[test]
    fn chunked_sum_is_pool_size_independent() {
        let term = |i: u64| 1.0 / (1.0 + i as f64);
        let one = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| sum_range(100_000, term));
        let four = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap()
            .install(|| sum_range(100_000, term));
        assert_eq!(one.to_bits(), four.to_bits());
    }
}
