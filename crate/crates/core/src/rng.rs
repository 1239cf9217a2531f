//! Deterministic named substreams derived from one master seed.
//!
//! Every consumer of randomness asks for a stream by name, e.g.
//! `substream(seed, "placement")` or `substream(seed, "sweep/power_dbw/-5.0/trial/3")`.
//! Streams for distinct names are statistically independent and adding a new
//! name never perturbs the draws of existing ones, which is what makes sweep
//! outputs stable when points are added.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn mix(master_seed: u64, name: &str) -> u64 {
    // FNV-1a over the name, folded with the master seed.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ master_seed;
    for &b in name.as_bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Independent RNG for `name`, derived from `master_seed`.
pub fn substream(master_seed: u64, name: &str) -> ChaCha8Rng {
    let mut state = mix(master_seed, name);
    let mut seed = [0u8; 32];
    for chunk in seed.chunks_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(seed)
}

/// Child seed for configs handed across module boundaries.
pub fn derive_seed(master_seed: u64, name: &str) -> u64 {
    let mut state = mix(master_seed, name);
    splitmix64(&mut state)
}
