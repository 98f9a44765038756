//! Counter-based random substreams.
//!
//! A stream is addressed by `(seed, domain, index)`: the seed and domain pick
//! a ChaCha key, the index picks the ChaCha stream. Trader `i` therefore sees
//! the same numbers whichever thread evaluates it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream domains, one per consumer of randomness.
pub mod domain {
    pub const POPULATION: u64 = 1;
    pub const SHOCKS: u64 = 2;
    pub const PATHS: u64 = 3;
    pub const GENERATOR: u64 = 4;
    pub const SYNTHETIC: u64 = 5;
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// One step of SplitMix64.
pub fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(GOLDEN);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the `k`-th child seed of `seed` (used for repeated-seed studies).
pub fn child_seed(seed: u64, k: u64) -> u64 {
    let mut state = seed ^ k.wrapping_mul(GOLDEN).rotate_left(17);
    splitmix64(&mut state);
    splitmix64(&mut state)
}

/// Independent generator for `(seed, domain, index)`.
pub fn substream(seed: u64, domain: u64, index: u64) -> ChaCha8Rng {
    let mut state = seed ^ domain.wrapping_mul(0xD1B5_4A32_D192_ED03);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}
