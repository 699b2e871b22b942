//! Execution policy for node-parallel loops.
//!
//! Work is split into fixed-size chunks whose boundaries do not depend on the
//! thread count. Each chunk is evaluated independently and the per-chunk
//! results are reduced in chunk order, so parallel and sequential runs produce
//! bit-identical floating point results.

use serde::{Deserialize, Serialize};
use std::ops::Range;

/// Nodes per work chunk.
pub const CHUNK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    Sequential,
    /// Uses the rayon pool when the `parallel` feature is enabled, otherwise
    /// falls back to sequential execution.
    #[default]
    Parallel,
}

impl Execution {
    /// True if this policy will actually fan out across threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }

    /// Evaluates `f` on consecutive chunks of `0..len`, returning results in chunk order.
    pub fn map_chunks<T, F>(self, len: usize, chunk: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(Range<usize>) -> T + Sync + Send,
    {
        let chunk = chunk.max(1);
        let n_chunks = len.div_ceil(chunk);
        let range = move |c: usize| c * chunk..((c + 1) * chunk).min(len);
        #[cfg(feature = "parallel")]
        if self == Execution::Parallel {
            use rayon::prelude::*;
            return (0..n_chunks).into_par_iter().map(|c| f(range(c))).collect();
        }
        (0..n_chunks).map(|c| f(range(c))).collect()
    }

    /// Maps `f` over items, preserving order.
    pub fn map<I, T, F>(self, items: &[I], f: F) -> Vec<T>
    where
        I: Sync,
        T: Send,
        F: Fn(&I) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Execution::Parallel {
            use rayon::prelude::*;
            return items.par_iter().map(f).collect();
        }
        items.iter().map(f).collect()
    }
}
