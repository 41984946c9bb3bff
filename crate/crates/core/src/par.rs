//! Data-parallel helpers.
//!
//! With the `parallel` feature the maps run on the rayon thread pool; without it
//! (or when [`Execution::Sequential`] is requested) they run in order on the
//! calling thread. Both paths evaluate every element with the same closure, so
//! results are bit-identical.

/// How embarrassingly parallel loops are executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

/// Collects `f(i)` for `i in 0..n` in index order.
pub fn map_indices<T, F>(exec: Execution, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..n).into_par_iter().map(f).collect()
        }
        _ => (0..n).map(f).collect(),
    }
}

/// Writes `f(i)` into `out[i]`.
pub fn fill_indices<T, F>(exec: Execution, out: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            out.par_iter_mut().enumerate().for_each(|(i, o)| *o = f(i));
        }
        _ => out.iter_mut().enumerate().for_each(|(i, o)| *o = f(i)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sequential_and_parallel_agree() {
        let f = |i: usize| (i as f64).sqrt().sin();
        let a = map_indices(Execution::Sequential, 1000, f);
        let b = map_indices(Execution::Parallel, 1000, f);
        assert_eq!(a, b);
        let mut c = vec![0.0; 1000];
        fill_indices(Execution::Parallel, &mut c, f);
        assert_eq!(a, c);
    }
}
