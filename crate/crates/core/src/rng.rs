//! Seed handling.
//!
//! Everything random in this crate flows through a ChaCha12 stream seeded
//! from a single 64-bit value, so a run is reproducible from one number.
//! Derived seeds (one per simulated path, one per noise stream) come from
//! SplitMix64 applied to the parent seed xor-folded with the child index,
//! which keeps sibling streams decorrelated without any shared state.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// One step of the SplitMix64 sequence. Fixed constants from the reference
/// implementation; output is a well-mixed 64-bit word.
pub fn splitmix64(state: &mut u64) {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    *state = z ^ (z >> 31);
}

/// Derives a child seed from `seed` and a child `index`.
///
/// Two SplitMix64 steps over `seed XOR (index + 1)`; the `+ 1` keeps
/// index 0 from colliding with the parent stream itself.
pub fn mix_seed(seed: u64, index: u64) -> u64 {
    let mut s = seed ^ index.wrapping_add(1).wrapping_mul(0xd1342543de82ef95);
    splitmix64(&mut s);
    splitmix64(&mut s);
    s
}

/// ChaCha12 stream for the given 64-bit seed.
pub fn seeded_rng(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}
