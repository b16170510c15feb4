//! Deterministic random streams.
//!
//! Every randomized component draws from ChaCha8, a fixed counter-based
//! generator, so results reproduce bit-for-bit across platforms and releases.
//! Independent work items (augmentation samples, scenes, noise draws) use
//! substreams keyed by (seed, stream index): the same seed never couples two
//! items, and items can be generated in any order or in parallel.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used throughout this crate.
pub type Stream = ChaCha8Rng;

/// Substream `index` of the generator seeded with `seed`.
pub fn substream(seed: u64, index: u64) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
