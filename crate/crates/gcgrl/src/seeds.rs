//! Named sub-stream seed derivation.
//!
//! Every source of randomness in the toolkit draws from a named stream
//! derived from the single user-facing seed, so that components can be
//! enabled or disabled without perturbing each other's random draws.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Derives a child seed from `master` and a stream name (FNV-1a over the
/// name, then a splitmix64 finalizer to decorrelate nearby masters).
pub fn stream(master: u64, name: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    mix(master ^ h)
}

/// Derives a per-step seed within a stream (e.g. one per epoch or view).
pub fn substream(stream_seed: u64, index: u64) -> u64 {
    mix(stream_seed ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

/// Seeded RNG used throughout the crate. ChaCha is stable across platforms
/// and rand versions, unlike `StdRng`.
pub fn rng(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
