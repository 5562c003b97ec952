//! Order-preserving data-parallel map with a sequential fallback.
//!
//! With the `parallel` feature disabled every [`Execution`] runs on the
//! calling thread; results are identical either way because each item is
//! processed independently and collected in input order.

/// How a batch of independent items is processed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// `workers == 0` uses the global rayon pool.
    Parallel { workers: usize },
}

impl Default for Execution {
    fn default() -> Self {
        Execution::Parallel { workers: 0 }
    }
}

impl Execution {
    pub fn from_workers(workers: usize) -> Self {
        if workers == 1 {
            Execution::Sequential
        } else {
            Execution::Parallel { workers }
        }
    }

    /// Whether this execution will actually use worker threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && matches!(self, Execution::Parallel { .. })
    }
}

/// Applies `f` to every item and returns the results in input order.
pub fn map_ordered<T, R, F>(exec: Execution, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel { workers } => parallel::map_ordered(workers, items, f),
        _ => items.iter().enumerate().map(|(i, t)| f(i, t)).collect(),
    }
}

#[cfg(feature = "parallel")]
mod parallel {
    use rayon::prelude::*;

    pub(super) fn map_ordered<T, R, F>(workers: usize, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(usize, &T) -> R + Sync + Send,
    {
        let run = || items.par_iter().enumerate().map(|(i, t)| f(i, t)).collect();
        if workers == 0 {
            return run();
        }
        match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
            Ok(pool) => pool.install(run),
            Err(e) => {
                log::warn!("could not build a {workers}-thread pool ({e}); using the global pool");
                run()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_and_sequential_agree() {
        let items: Vec<u64> = (0..1000).collect();
        let f = |i: usize, x: &u64| x * x + i as u64;
        let seq = map_ordered(Execution::Sequential, &items, f);
        let par = map_ordered(Execution::Parallel { workers: 3 }, &items, f);
        let global = map_ordered(Execution::default(), &items, f);
        assert_eq!(seq, par);
        assert_eq!(seq, global);
    }

    #[test]
    fn one_worker_is_sequential() {
        assert_eq!(Execution::from_workers(1), Execution::Sequential);
        assert_eq!(Execution::from_workers(4), Execution::Parallel { workers: 4 });
    }
}
