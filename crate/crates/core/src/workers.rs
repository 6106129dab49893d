//! Optional data-parallel execution with order-preserving results.

use rayon::prelude::*;

pub const NUM_WORKERS_ENV: &str = "EMBER_NUM_WORKERS";

/// Worker count from `EMBER_NUM_WORKERS`; absent or unparsable means serial.
pub fn configured_workers() -> usize {
    std::env::var(NUM_WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or(1)
}

/// Maps `f` over `items`, returning results in input order regardless of
/// how many workers ran.
pub fn ordered_map<T, R, F>(items: &[T], workers: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    if workers <= 1 || items.len() <= 1 {
        return items.iter().map(f).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(|| items.par_iter().map(f).collect()),
        Err(err) => {
            log::warn!("falling back to serial execution: {err}");
            items.iter().map(f).collect()
        }
    }
}
