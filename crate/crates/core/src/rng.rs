//! Seeding policy for all randomized components.
//!
//! Every stochastic routine in this crate draws from a [`ChaCha8Rng`] stream
//! expanded from a `u64` seed by SplitMix64. The generator and the expansion
//! are fixed here so that Monte-Carlo tables are reproducible bit-for-bit
//! across runs, platforms and thread schedules.
//!
//! Replicate `r` of a study derives its own seed from the master seed via
//! [`derive_seed`], so replicates are independent of execution order.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// One SplitMix64 step: advances the state and returns the mixed output.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministically derives an independent sub-seed from `(master, index)`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut state = master ^ index.wrapping_mul(0xa076_1d64_78bd_642f);
    // Two mixing rounds decorrelate adjacent indices.
    splitmix64(&mut state);
    splitmix64(&mut state)
}

/// The repository-wide random generator, seeded from a `u64`.
///
/// The 256-bit ChaCha8 key is the SplitMix64 expansion of the seed.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    let mut state = seed;
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}
