//! Deterministic parallel map-reduce over replicate indices.
//!
//! Replicates are cut into fixed-size chunks; each chunk is processed
//! sequentially and chunk results come back in index order. The output is
//! therefore independent of the number of worker threads.

use std::ops::Range;

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Replicates per chunk. Part of the reproducibility contract: changing it
/// changes floating-point summation order.
pub const CHUNK: u64 = 256;

/// Seed of replicate `i` under base seed `base`.
#[inline]
pub fn replicate_seed(base: u64, i: u64) -> u64 {
    base ^ i
}

/// Apply `f` to consecutive chunks of `range` and return results in order.
/// `workers = 0` uses the global pool.
pub fn map_chunks<T, F>(range: Range<u64>, workers: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(Range<u64>) -> Result<T> + Sync + Send,
{
    let chunks: Vec<Range<u64>> = (range.start..range.end)
        .step_by(CHUNK as usize)
        .map(|s| s..(s + CHUNK).min(range.end))
        .collect();
    let job = || chunks.par_iter().cloned().map(&f).collect::<Result<Vec<T>>>();
    if workers == 0 {
        job()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?
            .install(job)
    }
}

/// Map chunks and fold the results left to right with `merge`.
pub fn reduce_chunks<T, F, M>(range: Range<u64>, workers: usize, f: F, merge: M) -> Result<Option<T>>
where
    T: Send,
    F: Fn(Range<u64>) -> Result<T> + Sync + Send,
    M: Fn(T, T) -> T,
{
    Ok(map_chunks(range, workers, f)?.into_iter().reduce(merge))
}
