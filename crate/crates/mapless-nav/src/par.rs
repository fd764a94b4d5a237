//! Data-parallelism switchboard.
//!
//! Compiled with the `parallel` feature (default), the matrix kernels and
//! evaluation trials fan out over rayon. Every parallel loop in this crate
//! partitions work so that each output element is produced by exactly one
//! task using a fixed per-element accumulation order, so parallel and
//! sequential execution produce bit-identical results; the toggle exists for
//! benchmarking and for the single-threaded determinism runs, not because the
//! outputs differ.
//!
//! Without the feature, the sequential fallback is the only path and rayon is
//! not linked at all.

use std::sync::atomic::{AtomicBool, Ordering};

static PARALLEL: AtomicBool = AtomicBool::new(cfg!(feature = "parallel"));

/// Enable or disable the rayon paths at runtime. No-op (always sequential)
/// when the crate is built without the `parallel` feature.
pub fn set_parallel(enabled: bool) {
    PARALLEL.store(enabled && cfg!(feature = "parallel"), Ordering::Relaxed);
}

/// Whether the rayon paths are currently active.
pub fn parallel_enabled() -> bool {
    PARALLEL.load(Ordering::Relaxed)
}

/// Minimum number of work items before a loop bothers going parallel;
/// below this the fork/join overhead dominates.
pub const MIN_PAR_ITEMS: usize = 8;

/// Run `f(block_index, block)` over consecutive `block_len`-sized chunks of
/// `data` (the last chunk may be shorter), in parallel when enabled.
/// Each chunk is touched by exactly one task, so the result is identical to
/// the sequential loop.
pub fn for_each_chunk_mut<F>(data: &mut [f64], block_len: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync,
{
    debug_assert!(block_len > 0);
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        if parallel_enabled() && data.len() / block_len >= MIN_PAR_ITEMS {
            data.par_chunks_mut(block_len)
                .enumerate()
                .for_each(|(i, chunk)| f(i, chunk));
            return;
        }
    }
    for (i, chunk) in data.chunks_mut(block_len).enumerate() {
        f(i, chunk);
    }
}

/// Map `f` over `0..n`, collecting results in index order regardless of the
/// execution order.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        if parallel_enabled() && n >= 2 {
            return (0..n).into_par_iter().map(f).collect();
        }
    }
    (0..n).map(f).collect()
}
