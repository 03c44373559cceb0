//! Deterministic parallel map over substream indices.

use crate::walk_core::{derive_substream, RngStream};
use rayon::prelude::*;

/// Runs `f(i, stream(seed, i))` for `i < count` on the ambient rayon pool and
/// returns the results in index order, whatever the number of workers.
pub fn par_reps<T, F>(seed: u64, count: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64, &mut RngStream) -> T + Sync + Send,
{
    (0..count)
        .into_par_iter()
        .map(|i| f(i, &mut derive_substream(seed, i)))
        .collect()
}

/// Like [`par_reps`] over the index range `start..end`.
pub fn par_range<T, F>(seed: u64, start: u64, end: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64, &mut RngStream) -> T + Sync + Send,
{
    (start..end)
        .into_par_iter()
        .map(|i| f(i, &mut derive_substream(seed, i)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    #[test]
    fn worker_count_does_not_matter() {
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| par_reps(9, 1000, |_, r| r.next_u64() as f64 / u64::MAX as f64))
        };
        let a: f64 = run(1).iter().sum();
        let b: f64 = run(3).iter().sum();
        assert_eq!(a.to_bits(), b.to_bits());
    }
}
