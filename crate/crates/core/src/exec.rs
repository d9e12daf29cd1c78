//! Data-parallel map/reduce over replication indices.
//!
//! With the `parallel` feature (default) work runs on a dedicated rayon pool
//! of the requested size; without it, or with one worker, it runs on the
//! calling thread. The reduction must be associative and commutative so the
//! result does not depend on the split.

/// Folds `map(i)` for `i in 0..count` with `combine`, starting from `identity`.
pub fn map_reduce<T, M, C>(count: u64, workers: usize, identity: T, map: M, combine: C) -> T
where
    T: Send + Sync + Clone,
    M: Fn(u64) -> T + Sync + Send,
    C: Fn(T, T) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if workers > 1 {
            return parallel(count, workers, identity, map, combine);
        }
    }
    let _ = workers;
    sequential(count, identity, map, combine)
}

pub fn sequential<T, M, C>(count: u64, identity: T, map: M, combine: C) -> T
where
    M: Fn(u64) -> T,
    C: Fn(T, T) -> T,
{
    (0..count).map(map).fold(identity, combine)
}

#[cfg(feature = "parallel")]
pub fn parallel<T, M, C>(count: u64, workers: usize, identity: T, map: M, combine: C) -> T
where
    T: Send + Sync + Clone,
    M: Fn(u64) -> T + Sync + Send,
    C: Fn(T, T) -> T + Sync + Send,
{
    use rayon::prelude::*;

    let run = || {
        (0..count)
            .into_par_iter()
            .map(&map)
            .reduce(|| identity.clone(), &combine)
    };
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(run),
        Err(_) => run(),
    }
}

/// Worker count to use when the caller has no preference.
pub fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}
