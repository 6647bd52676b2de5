//! Deterministic stream derivation for parallel Monte Carlo runs.
//!
//! Every random draw in a simulation comes from a stream keyed by the master
//! seed plus a small integer path (stream class, frame index, user index).
//! Workers never share generator state, so results are independent of worker
//! count and frame scheduling order.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream class tags; the leading element of every derivation path.
pub mod stream {
    /// Frame scenario draws (arrival count, per-user placement and fading).
    pub const SCENARIO: u64 = 1;
    /// Receiver noise for regular simulation frames.
    pub const NOISE: u64 = 2;
    /// Noise-only frames used for threshold calibration.
    pub const CALIBRATION: u64 = 3;
    /// Noise-only frames used for noise statistics and false-alarm checks.
    pub const PROBE: u64 = 4;
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives an independent generator from `(master_seed, path)`.
///
/// The path words are absorbed one at a time through a splitmix64 chain and
/// the final state is expanded into a full 256-bit ChaCha seed, so distinct
/// paths yield unrelated streams.
pub fn substream(master_seed: u64, path: &[u64]) -> ChaCha8Rng {
    let mut state = master_seed ^ 0x6a09_e667_f3bc_c908;
    let _ = splitmix64(&mut state);
    for &word in path {
        state ^= word.wrapping_mul(0x9e37_79b9_7f4a_7c15);
        let _ = splitmix64(&mut state);
    }
    let mut seed = [0u8; 32];
    for chunk in seed.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(seed)
}
