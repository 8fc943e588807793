//! Seeded random streams.
//!
//! Every randomized operation takes an explicit `u64` seed. Independent pieces
//! of work (replicates, trials, samples) draw from sub-streams keyed by
//! `(seed, index)`, so results do not depend on scheduling or thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Stream `index` of the generator family seeded by `seed`.
pub fn stream(seed: u64, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Derives a child seed, used when one stream must fan out into a second level.
pub fn child_seed(seed: u64, index: u64) -> u64 {
    stream(seed, index).random()
}

/// Map `f` over `0..count` with per-item work, in parallel when the `parallel`
/// feature is on. Output order always follows the index.
pub(crate) fn map_indexed<T, F>(count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..count).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..count).map(f).collect()
    }
}
