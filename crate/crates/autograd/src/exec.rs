//! Switch between rayon-parallel and sequential execution of the data-parallel
//! loops (per-sample convolution kernels, batch preparation, resampling).
//!
//! The `parallel` cargo feature decides whether rayon is compiled in at all.
//! When it is, [`set_threading`] can still force the sequential path at run
//! time, which is what the benches use to compare the two.

use std::sync::atomic::{AtomicBool, Ordering};

static FORCE_SEQUENTIAL: AtomicBool = AtomicBool::new(false);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Threading {
    Sequential,
    Parallel,
}

pub fn set_threading(mode: Threading) {
    FORCE_SEQUENTIAL.store(mode == Threading::Sequential, Ordering::Relaxed);
}

pub fn threading() -> Threading {
    if cfg!(feature = "parallel") && !FORCE_SEQUENTIAL.load(Ordering::Relaxed) {
        Threading::Parallel
    } else {
        Threading::Sequential
    }
}

/// `(0..n).map(f).collect()`, fanned out over rayon when enabled. Output order
/// always follows the index, so results do not depend on the mode.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if n > 1 && threading() == Threading::Parallel {
            use rayon::prelude::*;
            return (0..n).into_par_iter().map(f).collect();
        }
    }
    (0..n).map(f).collect()
}

/// Runs `f(i, chunk)` over consecutive `chunk_len`-sized pieces of `data`.
pub fn for_each_chunk_mut<T, F>(data: &mut [T], chunk_len: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    assert!(chunk_len > 0);
    #[cfg(feature = "parallel")]
    {
        if data.len() > chunk_len && threading() == Threading::Parallel {
            use rayon::prelude::*;
            data.par_chunks_mut(chunk_len)
                .enumerate()
                .for_each(|(i, c)| f(i, c));
            return;
        }
    }
    data.chunks_mut(chunk_len)
        .enumerate()
        .for_each(|(i, c)| f(i, c));
}

/// Number of independent work groups worth splitting a reduction into.
pub fn workers() -> usize {
    #[cfg(feature = "parallel")]
    {
        if threading() == Threading::Parallel {
            return rayon::current_num_threads().max(1);
        }
    }
    1
}
