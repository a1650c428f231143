//! Parallel/sequential dispatch.
//!
//! Every helper has identical semantics with and without the `parallel`
//! feature. Reductions are split into fixed-size chunks whose partial sums are
//! combined in index order, so results are bitwise identical across builds
//! and thread counts.

use std::ops::Range;

use num_complex::Complex64;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Vectors shorter than this are processed on the calling thread.
pub const MIN_PARALLEL_LEN: usize = 1 << 14;

/// Chunk length for deterministic reductions.
pub const REDUCE_CHUNK: usize = 1 << 12;

/// Whether the crate was built with rayon support.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}

fn chunk_ranges(n: usize, chunk: usize) -> impl Iterator<Item = Range<usize>> {
    (0..n.div_ceil(chunk)).map(move |c| c * chunk..((c + 1) * chunk).min(n))
}

/// Sum of `f(range)` over consecutive ranges covering `0..n`.
pub fn chunked_sum<F>(n: usize, f: F) -> Complex64
where
    F: Fn(Range<usize>) -> Complex64 + Sync,
{
    if n <= REDUCE_CHUNK {
        return f(0..n);
    }
    let parts: Vec<Complex64> = map_ranges(n, REDUCE_CHUNK, &f);
    parts.into_iter().fold(Complex64::new(0.0, 0.0), |a, b| a + b)
}

/// Real-valued variant of [`chunked_sum`].
pub fn chunked_sum_real<F>(n: usize, f: F) -> f64
where
    F: Fn(Range<usize>) -> f64 + Sync,
{
    if n <= REDUCE_CHUNK {
        return f(0..n);
    }
    let parts: Vec<f64> = map_ranges(n, REDUCE_CHUNK, &f);
    parts.into_iter().sum()
}

fn map_ranges<R, F>(n: usize, chunk: usize, f: &F) -> Vec<R>
where
    R: Send,
    F: Fn(Range<usize>) -> R + Sync,
{
    #[cfg(feature = "parallel")]
    if n >= MIN_PARALLEL_LEN {
        let ranges: Vec<Range<usize>> = chunk_ranges(n, chunk).collect();
        return ranges.into_par_iter().map(f).collect();
    }
    chunk_ranges(n, chunk).map(f).collect()
}

/// `out[i] = f(i)` for every index.
pub fn fill_indexed<T, F>(out: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    #[cfg(feature = "parallel")]
    if out.len() >= MIN_PARALLEL_LEN {
        out.par_iter_mut().enumerate().for_each(|(i, o)| *o = f(i));
        return;
    }
    for (i, o) in out.iter_mut().enumerate() {
        *o = f(i);
    }
}

/// Calls `f(chunk_index, chunk)` on consecutive `chunk`-sized pieces of `v`.
pub fn for_each_chunk_mut<T, F>(v: &mut [T], chunk: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync,
{
    #[cfg(feature = "parallel")]
    if v.len() >= MIN_PARALLEL_LEN && v.len() / chunk >= 2 {
        v.par_chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
        return;
    }
    for (i, c) in v.chunks_mut(chunk).enumerate() {
        f(i, c);
    }
}

/// Calls `f(pair_index, a, b)` on zipped `chunk`-sized pieces of two slices.
pub fn for_each_chunk_pair_mut<T, F>(a: &mut [T], b: &mut [T], chunk: usize, f: F)
where
    T: Send,
    F: Fn(&mut [T], &mut [T]) + Sync,
{
    debug_assert_eq!(a.len(), b.len());
    #[cfg(feature = "parallel")]
    if a.len() >= MIN_PARALLEL_LEN / 2 && a.len() / chunk >= 2 {
        a.par_chunks_mut(chunk).zip(b.par_chunks_mut(chunk)).for_each(|(x, y)| f(x, y));
        return;
    }
    for (x, y) in a.chunks_mut(chunk).zip(b.chunks_mut(chunk)) {
        f(x, y);
    }
}

/// Job-level map over `0..n`: gradient components, sweep points, restarts.
/// The output order always matches the index order.
pub fn map_jobs<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}
