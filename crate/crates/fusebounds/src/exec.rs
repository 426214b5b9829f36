//! Execution helpers: order-preserving parallel map with a sequential
//! fallback, and derivation of independent seed streams.
//!
//! Results are collected in index order, so aggregates computed from the
//! returned vector are identical for any thread count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// How to run a batch of independent work items.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parallelism {
    /// Run in the calling thread, in index order.
    Sequential,
    /// Run on a dedicated pool with this many threads.
    Threads(usize),
    /// Run on the global pool (machine parallelism).
    Auto,
}

impl Default for Parallelism {
    fn default() -> Self {
        Parallelism::Auto
    }
}

/// Map `f` over `0..n`, returning results in index order.
#[cfg(feature = "parallel")]
pub fn map_indexed<T, F>(n: usize, parallelism: Parallelism, f: F) -> Vec<T>
where
    F: Fn(usize) -> T + Sync + Send,
    T: Send,
{
    match parallelism {
        Parallelism::Sequential => (0..n).map(f).collect(),
        Parallelism::Auto => (0..n).into_par_iter().map(f).collect(),
        Parallelism::Threads(t) => {
            if t <= 1 {
                return (0..n).map(f).collect();
            }
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .expect("failed to build thread pool");
            pool.install(|| (0..n).into_par_iter().map(f).collect())
        }
    }
}

/// Sequential fallback used when the `parallel` feature is disabled.
#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T, F>(n: usize, _parallelism: Parallelism, f: F) -> Vec<T>
where
    F: Fn(usize) -> T + Sync + Send,
    T: Send,
{
    (0..n).map(f).collect()
}

/// Derive an independent seed for work item `stream` from a master seed
/// (splitmix64-style finalizer).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
