//! Data-parallel execution helper. The `parallel` feature (on by default)
//! backs [`map_collect`] with a rayon pool whose width can be capped through
//! the `PLANNER_THREADS` environment variable; without the feature, or with
//! [`Parallelism::Sequential`], work runs on the calling thread. Results come
//! back in input order either way.

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Parallelism {
    #[default]
    Auto,
    Sequential,
}

/// Worker cap from `PLANNER_THREADS`, if set to a positive integer.
pub fn thread_cap() -> Option<usize> {
    std::env::var("PLANNER_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .filter(|&n| n > 0)
}

#[cfg(feature = "parallel")]
pub fn map_collect<T, U, F>(mode: Parallelism, items: Vec<T>, f: F) -> Vec<U>
where
    T: Send,
    U: Send,
    F: Fn(T) -> U + Sync + Send,
{
    match mode {
        Parallelism::Sequential => items.into_iter().map(f).collect(),
        Parallelism::Auto => {
            use rayon::prelude::*;
            let run = || items.into_par_iter().map(&f).collect();
            let pool = thread_cap()
                .and_then(|cap| rayon::ThreadPoolBuilder::new().num_threads(cap).build().ok());
            match pool {
                Some(pool) => pool.install(run),
                None => run(),
            }
        }
    }
}

#[cfg(not(feature = "parallel"))]
pub fn map_collect<T, U, F>(_mode: Parallelism, items: Vec<T>, f: F) -> Vec<U>
where
    T: Send,
    U: Send,
    F: Fn(T) -> U + Sync + Send,
{
    items.into_iter().map(f).collect()
}
