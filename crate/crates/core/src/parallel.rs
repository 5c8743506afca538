//! Index-ordered map, optionally on a rayon pool. Output order and values do
//! not depend on the thread count.

use alloc::vec::Vec;

use crate::Result;

/// Evaluates `f(0..n)` and returns the results in index order, stopping at
/// the first error. `threads` is only a hint and is ignored without the
/// `parallel` feature.
pub fn try_map_indexed<T, F>(n: usize, threads: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if threads > 1 && n > 1 {
        use rayon::prelude::*;
        if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
            return pool.install(|| (0..n).into_par_iter().map(&f).collect());
        }
    }
    let _ = threads;
    (0..n).map(f).collect()
}
