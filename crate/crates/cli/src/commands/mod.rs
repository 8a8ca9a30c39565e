//! Subcommand implementations.

pub mod analyze;
pub mod concentration;
pub mod simulate;
pub mod solve;

use tsmdp::error::Result;

/// Builds the worker pool: `TSMDP_LAB_THREADS` wins, then the config value,
/// then available parallelism.
pub fn build_pool(config_workers: Option<usize>) -> Result<rayon::ThreadPool> {
    let threads = std::env::var("TSMDP_LAB_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .or(config_workers)
        .unwrap_or_else(|| {
            std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
        });
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| tsmdp::Error::Config(format!("cannot build worker pool: {e}")))
}
