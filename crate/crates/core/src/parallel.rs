//! Execution strategy for the data-parallel loops.
//!
//! With the `parallel` feature, [`Exec::Parallel`] fans work out on the rayon
//! pool; without it every call runs sequentially. Work is always split into
//! the same fixed chunks and results are gathered in index order, so both
//! strategies produce bit-identical output.

use ndarray::{s, Array2, ArrayView2, Axis};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exec {
    Sequential,
    #[default]
    Parallel,
}

impl Exec {
    /// Whether this build can actually run in parallel.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }

    /// Ordered map over `items`.
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

    /// Ordered map over `0..n`.
    pub fn map_range<R, F>(self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            use rayon::prelude::*;
            return (0..n).into_par_iter().map(f).collect();
        }
        (0..n).map(f).collect()
    }
}

/// Column block width used by [`matmul`].
const COL_BLOCK: usize = 128;

/// Dense product `a · b`, split into fixed column blocks of the output.
///
/// Each output entry is computed by exactly one block kernel regardless of
/// the strategy, so the result does not depend on thread count.
pub fn matmul(exec: Exec, a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Array2<f64> {
    let (rows, cols) = (a.nrows(), b.ncols());
    if !exec.is_parallel() || cols <= COL_BLOCK {
        return blocked(a, b);
    }
    let blocks = cols.div_ceil(COL_BLOCK);
    let parts = exec.map_range(blocks, |i| {
        let lo = i * COL_BLOCK;
        let hi = (lo + COL_BLOCK).min(cols);
        a.dot(&b.slice(s![.., lo..hi]))
    });
    let mut out = Array2::zeros((rows, cols));
    for (i, part) in parts.into_iter().enumerate() {
        let lo = i * COL_BLOCK;
        out.slice_mut(s![.., lo..lo + part.ncols()]).assign(&part);
    }
    out
}

fn blocked(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Array2<f64> {
    let cols = b.ncols();
    if cols <= COL_BLOCK {
        return a.dot(&b);
    }
    let mut out = Array2::zeros((a.nrows(), cols));
    for (i, mut chunk) in out.axis_chunks_iter_mut(Axis(1), COL_BLOCK).enumerate() {
        let lo = i * COL_BLOCK;
        let width = chunk.ncols();
        chunk.assign(&a.dot(&b.slice(s![.., lo..lo + width])));
    }
    out
}
