//! Execution-mode switch between the rayon data-parallel kernels and their
//! sequential twins.
//!
//! Every parallel kernel in this crate partitions work so that each output
//! element is written by exactly one task with a fixed per-element reduction
//! order. Results are therefore bit-identical between the two modes; the
//! switch only affects speed. The `parallel` cargo feature removes the rayon
//! dependency entirely; [`force_sequential`] flips the mode at runtime so
//! benchmarks can compare both paths in one process.

use std::sync::atomic::{AtomicBool, Ordering};

static FORCE_SEQUENTIAL: AtomicBool = AtomicBool::new(false);

/// Route all kernels through the sequential path even when the `parallel`
/// feature is enabled.
pub fn force_sequential(on: bool) {
    FORCE_SEQUENTIAL.store(on, Ordering::SeqCst);
}

/// True when kernels will actually fan out onto the rayon pool.
pub fn parallel_enabled() -> bool {
    cfg!(feature = "parallel") && !FORCE_SEQUENTIAL.load(Ordering::SeqCst)
}

/// Apply `f` to every `cols`-wide row of `data`, in parallel when enabled.
/// Each row is an independent output slot, so ordering does not matter.
pub(crate) fn for_each_row<F>(data: &mut [f64], cols: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    if cols == 0 || data.is_empty() {
        return;
    }
    #[cfg(feature = "parallel")]
    if parallel_enabled() {
        use rayon::prelude::*;
        data.par_chunks_mut(cols)
            .enumerate()
            .for_each(|(i, row)| f(i, row));
        return;
    }
    for (i, row) in data.chunks_mut(cols).enumerate() {
        f(i, row);
    }
}

/// Map `0..n` through `f`, preserving index order in the output.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel_enabled() {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    (0..n).map(f).collect()
}
