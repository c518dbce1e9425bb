//! Execution policy for the data-parallel kernels.
//!
//! With the `parallel` feature (default) the kernels fan out over a rayon
//! pool. Without it, or when [`Execution::Sequential`] is selected at
//! runtime, the same closures run on the calling thread. Both paths visit
//! elements in the same order per output slot and reduce partial sums in a
//! fixed chunk order, so results are bit-identical between the two.

use std::ops::Range;
use std::sync::atomic::{AtomicU8, Ordering};

/// Which path the kernels take.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    Parallel,
}

static MODE: AtomicU8 = AtomicU8::new(if cfg!(feature = "parallel") { 1 } else { 0 });

/// Work below this many elements always runs sequentially.
const MIN_PARALLEL_LEN: usize = 256;

/// Fixed chunk length for reductions.
const CHUNK: usize = 512;

impl Execution {
    /// `Parallel` only when the crate was built with rayon.
    pub fn available() -> &'static [Execution] {
        if cfg!(feature = "parallel") {
            &[Execution::Sequential, Execution::Parallel]
        } else {
            &[Execution::Sequential]
        }
    }
}

/// Current global mode. Always `Sequential` without the `parallel` feature.
pub fn mode() -> Execution {
    if cfg!(feature = "parallel") && MODE.load(Ordering::Relaxed) == 1 {
        Execution::Parallel
    } else {
        Execution::Sequential
    }
}

/// Select the global mode; `Parallel` is ignored without the `parallel` feature.
pub fn set_mode(exec: Execution) {
    MODE.store(matches!(exec, Execution::Parallel) as u8, Ordering::Relaxed);
}

/// Run `f` under `exec`, restoring the previous mode afterwards.
pub fn with_mode<R>(exec: Execution, f: impl FnOnce() -> R) -> R {
    let prev = mode();
    set_mode(exec);
    let out = f();
    set_mode(prev);
    out
}

fn go_parallel(len: usize) -> bool {
    len >= MIN_PARALLEL_LEN && mode() == Execution::Parallel
}

/// `(0..n).map(f).collect()`, possibly in parallel.
pub fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if go_parallel(n) {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    (0..n).map(f).collect()
}

/// Map over a slice of independent work items (grid points, runs, streams).
/// Work items are usually heavy, so no minimum length applies.
pub fn map_items<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if mode() == Execution::Parallel && items.len() > 1 {
        use rayon::prelude::*;
        return items.par_iter().map(f).collect();
    }
    items.iter().map(f).collect()
}

/// Apply `f(index, &mut slot)` to every element.
pub fn for_each_mut<T, F>(data: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize, &mut T) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if go_parallel(data.len()) {
        use rayon::prelude::*;
        data.par_iter_mut().enumerate().for_each(|(i, x)| f(i, x));
        return;
    }
    data.iter_mut().enumerate().for_each(|(i, x)| f(i, x));
}

/// Apply `f(first_index, chunk)` to consecutive chunks of `chunk_len` elements.
pub fn for_each_chunk_mut<T, F>(data: &mut [T], chunk_len: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    let chunk_len = chunk_len.max(1);
    #[cfg(feature = "parallel")]
    if go_parallel(data.len()) {
        use rayon::prelude::*;
        data.par_chunks_mut(chunk_len)
            .enumerate()
            .for_each(|(c, xs)| f(c * chunk_len, xs));
        return;
    }
    data.chunks_mut(chunk_len)
        .enumerate()
        .for_each(|(c, xs)| f(c * chunk_len, xs));
}

/// Sum of `partial(range)` over fixed-size chunks of `0..n`, combined in
/// chunk order so the rounding does not depend on the execution mode.
pub fn chunked_sum<T, F>(n: usize, zero: T, partial: F) -> T
where
    T: Send + Copy + std::ops::Add<Output = T>,
    F: Fn(Range<usize>) -> T + Sync + Send,
{
    let chunks = n.div_ceil(CHUNK);
    let parts = map_range(chunks, |c| partial(c * CHUNK..((c + 1) * CHUNK).min(n)));
    parts.into_iter().fold(zero, |acc, x| acc + x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum_is_mode_independent() {
        let f = |r: Range<usize>| r.map(|i| (i as f64).sqrt().sin()).sum::<f64>();
        let results: Vec<f64> = Execution::available()
            .iter()
            .map(|&e| with_mode(e, || chunked_sum(100_000, 0.0, f)))
            .collect();
        assert!(results.windows(2).all(|w| w[0].to_bits() == w[1].to_bits()));
    }

    #[test]
    fn map_range_preserves_order() {
        let v = map_range(5000, |i| i * 2);
        assert!(v.iter().enumerate().all(|(i, &x)| x == 2 * i));
    }
}
