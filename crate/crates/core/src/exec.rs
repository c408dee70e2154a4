//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) independent work items are spread
//! over the rayon pool. Without it, or when [`Execution::Sequential`] is
//! requested, everything runs on the calling thread. Both paths produce
//! results in input order, so outputs are identical either way.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// How independent work items are scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// `Parallel` when compiled with the `parallel` feature, else `Sequential`.
    pub fn best() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

/// Maps `f` over `items`, preserving order.
pub fn map<T, R, F>(exec: Execution, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => items.par_iter().map(f).collect(),
        _ => items.iter().map(f).collect(),
    }
}

/// Maps `f` over `0..n`, preserving order.
pub fn map_range<R, F>(exec: Execution, n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => (0..n).into_par_iter().map(f).collect(),
        _ => (0..n).map(f).collect(),
    }
}

/// Terms per partial sum in [`sum_range`].
const CHUNK: usize = 1024;

/// Sums `f(i)` for `i in 0..n` into a fixed-size accumulator.
///
/// Partial sums over fixed chunks of `CHUNK` terms are added in chunk
/// order on both paths, so the result is bit-identical either way and
/// does not depend on thread scheduling.
pub fn sum_range<const N: usize, F>(exec: Execution, n: usize, f: F) -> [f64; N]
where
    F: Fn(usize) -> [f64; N] + Sync + Send,
{
    let add = |mut a: [f64; N], b: [f64; N]| {
        for (x, y) in a.iter_mut().zip(b) {
            *x += y;
        }
        a
    };
    let chunks = n.div_ceil(CHUNK);
    let partial = map_range(exec, chunks, |c| {
        (c * CHUNK..((c + 1) * CHUNK).min(n)).map(&f).fold([0.0; N], add)
    });
    partial.into_iter().fold([0.0; N], add)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_paths_agree() {
        let items: Vec<u64> = (0..1000).collect();
        let a = map(Execution::Sequential, &items, |x| x * x);
        let b = map(Execution::best(), &items, |x| x * x);
        assert_eq!(a, b);

        let s = sum_range::<2, _>(Execution::Sequential, 5000, |i| [(i as f64).sqrt(), 1.0]);
        let p = sum_range::<2, _>(Execution::best(), 5000, |i| [(i as f64).sqrt(), 1.0]);
        assert_eq!(s, p);
        assert_eq!(s[1], 5000.0);
    }
}
