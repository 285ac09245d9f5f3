//! Thin switch between rayon and sequential execution.
//!
//! All heavy loops in this crate map a pure function over independent items
//! and collect the results in input order. Because every item is computed by
//! identical arithmetic and the collection order is fixed, the parallel and
//! sequential paths produce bit-identical results; the `parallel` feature
//! only changes wall-clock time.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over `items`, in parallel when the `parallel` feature is on.
pub fn maybe_par_map<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Always-sequential map; reference path for the benchmark suite.
pub fn seq_map<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    items.iter().map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_and_sequential_agree() {
        let xs: Vec<f64> = (0..1000).map(|i| i as f64 * 0.37).collect();
        let f = |x: &f64| (x.sin() * 1e6).round() / 1e6 + x.sqrt();
        let a = maybe_par_map(&xs, f);
        let b = seq_map(&xs, f);
        assert_eq!(a, b);
    }
}
