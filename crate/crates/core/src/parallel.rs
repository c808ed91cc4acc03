//! Deterministic parallel map over replica indices.
//!
//! Results are collected in index order, so any reduction performed on the
//! returned vector is independent of the worker count and the schedule.

use rayon::prelude::*;

/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "ITERLOG_THREADS";

/// Worker count from `ITERLOG_THREADS`, falling back to the available
/// parallelism.
pub fn thread_count() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

/// Applies `f` to `0..n` on a pool of `threads` workers and returns the
/// results in index order.
pub fn map_indexed<T, F>(n: usize, threads: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    if threads <= 1 || n <= 1 {
        return (0..n).map(f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("thread pool");
    pool.install(|| (0..n).into_par_iter().map(f).collect())
}
