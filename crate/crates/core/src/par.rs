//! Execution strategy for the data-parallel loops (per-paper gradients and
//! per-paper predictions).
//!
//! Both strategies produce bit-identical results: work is split into chunks
//! whose boundaries do not depend on the thread count, and partial results
//! are always merged in index order.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Uses rayon when the `parallel` feature is enabled, otherwise runs
    /// sequentially.
    #[default]
    Parallel,
}

impl Execution {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }

    /// `items.iter().map(f).collect()`, possibly in parallel, preserving order.
    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Execution::Parallel {
            return items.par_iter().map(f).collect();
        }
        items.iter().map(f).collect()
    }

    /// Maps each fixed-size chunk of `items` to a partial result, then folds
    /// the partials left to right with `merge`.
    pub fn map_chunks_reduce<T, R, F, M>(
        self,
        items: &[T],
        chunk: usize,
        f: F,
        merge: M,
    ) -> Option<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&[T]) -> R + Sync + Send,
        M: FnMut(R, R) -> R,
    {
        let chunk = chunk.max(1);
        #[cfg(feature = "parallel")]
        if self == Execution::Parallel {
            let parts: Vec<R> = items.par_chunks(chunk).map(f).collect();
            return parts.into_iter().reduce(merge);
        }
        items.chunks(chunk).map(f).reduce(merge)
    }
}
