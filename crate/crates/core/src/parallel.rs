//! Reproducible random streams and worker control for ensembles.
//!
//! Each trajectory owns a ChaCha8 stream selected by its index, so its
//! draws do not depend on how trajectories are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Default ensemble seed.
pub const DEFAULT_SEED: u64 = 0x5EED;

/// Trajectories per work item. Fixed so that partial sums are formed over
/// the same index ranges whatever the worker count.
pub const CHUNK: u64 = 2048;

pub fn trajectory_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Runs `f` on a dedicated pool of `workers` threads, or on the global pool
/// when `workers` is `None`.
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    match workers {
        None => f(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .expect("failed to build worker pool")
            .install(f),
    }
}

/// `[start, end)` index ranges covering `0..n` in blocks of [`CHUNK`].
pub fn chunks(n: u64) -> Vec<(u64, u64)> {
    (0..n.div_ceil(CHUNK))
        .map(|c| (c * CHUNK, ((c + 1) * CHUNK).min(n)))
        .collect()
}
