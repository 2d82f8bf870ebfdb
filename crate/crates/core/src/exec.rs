//! Order-preserving data-parallel map with a sequential fallback.
//!
//! Results are always collected in index order, so output does not depend on
//! the execution mode or the thread count.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// `Parallel` degrades to `Sequential` when built without the `parallel`
    /// feature.
    pub fn effective(self) -> Execution {
        if cfg!(feature = "parallel") {
            self
        } else {
            Execution::Sequential
        }
    }
}

pub fn map_indexed<T, F>(exec: Execution, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec.effective() {
        Execution::Sequential => (0..n).map(f).collect(),
        Execution::Parallel => par_map(n, f),
    }
}

#[cfg(feature = "parallel")]
fn par_map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn par_map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}

/// Sizes the global worker pool. Only the first call has an effect; later
/// calls (or builds without the `parallel` feature) are no-ops.
pub fn configure_threads(threads: usize) {
    #[cfg(feature = "parallel")]
    {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    #[cfg(not(feature = "parallel"))]
    let _ = threads;
}
