//! Execution strategy for the data-parallel loops.
//!
//! Every parallel path writes results by index or merges partials in chunk
//! order, so `Sequential` and `Parallel` produce bit-identical output. Without
//! the `parallel` feature, `Parallel` runs sequentially.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Items per chunk for chunked reductions. Fixed so that the partial sums
/// (and therefore the floating-point rounding) do not depend on thread count.
pub const REDUCE_CHUNK: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

impl Execution {
    /// True when this strategy will actually run on the rayon pool.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }

    /// Order-preserving map.
    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(usize, &T) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return items.par_iter().enumerate().map(|(i, t)| f(i, t)).collect();
        }
        items.iter().enumerate().map(|(i, t)| f(i, t)).collect()
    }

    /// Order-preserving map over `0..n`.
    pub fn map_range<R, F>(self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return (0..n).into_par_iter().map(f).collect();
        }
        (0..n).map(f).collect()
    }

    /// Fill `out` in row blocks of width `row_len`; block `i` is written by `f(i, block)`.
    pub fn fill_rows<F>(self, out: &mut [f64], row_len: usize, f: F)
    where
        F: Fn(usize, &mut [f64]) + Sync + Send,
    {
        if row_len == 0 {
            return;
        }
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            out.par_chunks_mut(row_len)
                .enumerate()
                .for_each(|(i, row)| f(i, row));
            return;
        }
        out.chunks_mut(row_len)
            .enumerate()
            .for_each(|(i, row)| f(i, row));
    }

    /// Chunked reduction: `partial` runs on each `REDUCE_CHUNK`-sized slice
    /// (with the slice's starting offset), and the partials are folded with
    /// `merge` strictly in chunk order.
    pub fn chunked_reduce<T, A, P, M>(self, items: &[T], partial: P, init: A, merge: M) -> A
    where
        T: Sync,
        A: Send,
        P: Fn(usize, &[T]) -> A + Sync + Send,
        M: Fn(A, A) -> A,
    {
        let partials: Vec<A> = {
            #[cfg(feature = "parallel")]
            {
                if self.is_parallel() {
                    items
                        .par_chunks(REDUCE_CHUNK)
                        .enumerate()
                        .map(|(c, chunk)| partial(c * REDUCE_CHUNK, chunk))
                        .collect()
                } else {
                    items
                        .chunks(REDUCE_CHUNK)
                        .enumerate()
                        .map(|(c, chunk)| partial(c * REDUCE_CHUNK, chunk))
                        .collect()
                }
            }
            #[cfg(not(feature = "parallel"))]
            {
                items
                    .chunks(REDUCE_CHUNK)
                    .enumerate()
                    .map(|(c, chunk)| partial(c * REDUCE_CHUNK, chunk))
                    .collect()
            }
        };
        partials.into_iter().fold(init, merge)
    }
}
