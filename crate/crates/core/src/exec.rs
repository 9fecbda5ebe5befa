//! Data-parallel map over independent work items.
//!
//! With the `parallel` feature (on by default) [`Execution::Parallel`] runs
//! items on the rayon pool; without it every mode degrades to a plain
//! sequential loop. Results always come back in input order, so output is
//! identical across modes.

use crate::error::Result;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// Whether this build can actually run items concurrently.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }

    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            use rayon::prelude::*;
            return items.par_iter().map(f).collect();
        }
        items.iter().map(f).collect()
    }

    pub fn try_map<T, R, F>(self, items: &[T], f: F) -> Result<Vec<R>>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> Result<R> + Sync + Send,
    {
        self.map(items, f).into_iter().collect()
    }

    /// Runs `f` with at most `max_threads` workers available to nested
    /// [`Execution::map`] calls.
    pub fn install<R, F>(self, max_threads: Option<usize>, f: F) -> R
    where
        R: Send,
        F: FnOnce() -> R + Send,
    {
        #[cfg(feature = "parallel")]
        if let (true, Some(threads)) = (self.is_parallel(), max_threads) {
            if let Ok(pool) = rayon::ThreadPoolBuilder::new()
                .num_threads(threads.max(1))
                .build()
            {
                return pool.install(f);
            }
        }
        let _ = max_threads;
        f()
    }
}

/// Worker count that keeps `bytes_per_task` × workers under `budget_bytes`.
pub fn threads_for_budget(budget_bytes: u64, bytes_per_task: u64) -> usize {
    let cap = (budget_bytes / bytes_per_task.max(1)).max(1) as usize;
    available_threads().min(cap)
}

pub fn available_threads() -> usize {
    #[cfg(feature = "parallel")]
    {
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}
