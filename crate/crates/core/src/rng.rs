//! Seeded random streams.
//!
//! Every stochastic component draws from a ChaCha stream derived from the run
//! seed plus a tag path (e.g. `[fold, epoch, sample]`), so parallel and
//! serial execution see identical randomness and reruns are bit-reproducible.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// A single derived seed for `(seed, tags...)`, for APIs that take a seed.
pub fn derive_seed(seed: u64, tags: &[u64]) -> u64 {
    use rand::RngCore;
    stream(seed, tags).next_u64()
}

/// Independent stream for `(seed, tags...)`.
pub fn stream(seed: u64, tags: &[u64]) -> ChaCha8Rng {
    let mut state = seed ^ 0x42524e56; // keep seed 0 distinct from tag-only paths
    let mut mixed = splitmix64(&mut state);
    for &t in tags {
        state ^= t.wrapping_mul(0x9e3779b97f4a7c15);
        mixed = splitmix64(&mut state);
    }
    let mut key = [0u8; 32];
    let mut s = mixed;
    for chunk in key.chunks_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut s).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}
