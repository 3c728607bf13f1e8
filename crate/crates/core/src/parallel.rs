use rayon::prelude::*;

/// Worker configuration for trial fan-out. `None` uses rayon's global pool.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Workers(pub Option<usize>);

impl Workers {
    pub fn single() -> Self {
        Workers(Some(1))
    }

    /// Evaluates `f(0..n)` and returns results in index order. Output is
    /// independent of the worker count as long as `f` is a pure function of
    /// its index.
    pub fn map_indexed<T, F>(self, n: u64, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64) -> T + Sync + Send,
    {
        let run = || (0..n).into_par_iter().map(&f).collect::<Vec<T>>();
        match self.0 {
            Some(1) => (0..n).map(&f).collect(),
            Some(k) => rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .expect("thread pool")
                .install(run),
            None => run(),
        }
    }
}
