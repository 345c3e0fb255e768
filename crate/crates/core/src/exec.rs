//! Execution policy for per-voxel and per-frequency loops.
//!
//! With the `parallel` feature the [`Exec::Parallel`] policy dispatches to
//! rayon; without it both policies run the same sequential loops.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Minimum number of items per rayon task.
#[cfg(feature = "parallel")]
const MIN_CHUNK: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    Parallel,
}

impl Default for Exec {
    /// Parallel when built with rayon and more than one worker is available.
    fn default() -> Self {
        #[cfg(feature = "parallel")]
        if rayon::current_num_threads() > 1 {
            return Exec::Parallel;
        }
        Exec::Sequential
    }
}

impl Exec {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }

    /// Applies `f(index, item)` to every element.
    pub fn for_each_mut<T, F>(self, data: &mut [T], f: F)
    where
        T: Send,
        F: Fn(usize, &mut T) + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            data.par_iter_mut()
                .with_min_len(MIN_CHUNK)
                .enumerate()
                .for_each(|(i, x)| f(i, x));
            return;
        }
        data.iter_mut().enumerate().for_each(|(i, x)| f(i, x));
    }

    /// Applies `f(chunk_index, chunk)` to consecutive chunks of `chunk` items.
    pub fn for_each_chunk_mut<T, F>(self, data: &mut [T], chunk: usize, f: F)
    where
        T: Send,
        F: Fn(usize, &mut [T]) + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            data.par_chunks_mut(chunk)
                .enumerate()
                .for_each(|(i, c)| f(i, c));
            return;
        }
        data.chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
    }

    /// Elementwise `f(i, &mut a[i], &b[i])`.
    pub fn zip_mut<A, B, F>(self, a: &mut [A], b: &[B], f: F)
    where
        A: Send,
        B: Sync,
        F: Fn(usize, &mut A, &B) + Sync + Send,
    {
        debug_assert_eq!(a.len(), b.len());
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            a.par_iter_mut()
                .with_min_len(MIN_CHUNK)
                .zip(b.par_iter())
                .enumerate()
                .for_each(|(i, (x, y))| f(i, x, y));
            return;
        }
        a.iter_mut()
            .zip(b)
            .enumerate()
            .for_each(|(i, (x, y))| f(i, x, y));
    }

    /// Collects `f(i)` for `i in 0..n`.
    pub fn map<R, F>(self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return (0..n).into_par_iter().with_min_len(MIN_CHUNK).map(f).collect();
        }
        (0..n).map(f).collect()
    }

    /// Collects `f(i)` for `i in 0..n`, stopping at the first error.
    pub fn try_map<R, E, F>(self, n: usize, f: F) -> Result<Vec<R>, E>
    where
        R: Send,
        E: Send,
        F: Fn(usize) -> Result<R, E> + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return (0..n).into_par_iter().with_min_len(MIN_CHUNK).map(f).collect();
        }
        (0..n).map(f).collect()
    }

    /// Sum of `f(i)` for `i in 0..n`.
    pub fn sum<F>(self, n: usize, f: F) -> f64
    where
        F: Fn(usize) -> f64 + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return (0..n).into_par_iter().with_min_len(MIN_CHUNK).map(f).sum();
        }
        (0..n).map(f).sum()
    }

    /// Maximum of `f(i)` for `i in 0..n` (0 for an empty range).
    pub fn max<F>(self, n: usize, f: F) -> f64
    where
        F: Fn(usize) -> f64 + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return (0..n)
                .into_par_iter()
                .with_min_len(MIN_CHUNK)
                .map(f)
                .reduce(|| 0.0, f64::max);
        }
        (0..n).map(f).fold(0.0, f64::max)
    }
}
