//! Deterministic named randomness streams.
//!
//! Every consumer of randomness (noise channel, exploration draws, body
//! samplers, sweeps) owns a stream keyed by `(seed, replicate, tag)`. Streams
//! never share state, so refactoring how one component consumes its draws
//! cannot shift the draws of any other, and replicates can run in parallel
//! while staying byte-identical with a serial run.

use rand::SeedableRng;
pub use rand_chacha::ChaCha8Rng as Rng;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive the stream for `(seed, replicate, tag)`.
///
/// The key schedule is fixed forever; traces on disk depend on it.
pub fn stream(seed: u64, replicate: u64, tag: &str) -> Rng {
    let mut state = seed ^ 0xA076_1D64_78BD_642F;
    splitmix64(&mut state);
    state ^= replicate.wrapping_mul(0xE703_7ED1_A0B4_28DB);
    splitmix64(&mut state);
    for &b in tag.as_bytes() {
        state ^= u64::from(b);
        splitmix64(&mut state);
    }
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    Rng::from_seed(key)
}
