//! Counter-based random streams.
//!
//! Every Monte Carlo task draws from its own ChaCha8 stream whose key is built
//! from `(seed, domain)` and whose stream id is the task index. A task's draws
//! therefore depend only on its coordinates, never on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SampleRng = ChaCha8Rng;

/// Domain tag for symbol paths (atom draws).
pub const DOMAIN_SYMBOLS: u64 = 0x5359_4d42;
/// Domain tag for initial phases drawn from Haar measure.
pub const DOMAIN_PHASE: u64 = 0x5048_4153;

const fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Combines a domain tag with a sub-index (e.g. the position of `n` in a list).
pub const fn subdomain(domain: u64, index: u64) -> u64 {
    splitmix64(domain ^ splitmix64(index))
}

/// Independent stream for task `index` of experiment `(seed, domain)`.
pub fn sample_rng(seed: u64, domain: u64, index: u64) -> SampleRng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&domain.to_le_bytes());
    key[16..24].copy_from_slice(&splitmix64(seed).to_le_bytes());
    key[24..].copy_from_slice(&splitmix64(domain ^ seed.rotate_left(17)).to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}
