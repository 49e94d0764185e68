//! Seeded random streams.
//!
//! Every stochastic component derives its own ChaCha stream from the run
//! seed plus a tuple of keys, so results never depend on how work is
//! scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Stream-domain tags. Distinct tags keep, e.g., layout and MAC draws apart
/// even when the remaining keys coincide.
pub mod domain {
    pub const LAYOUT: u64 = 1;
    pub const MAC: u64 = 2;
    pub const TRAIN: u64 = 3;
    pub const PARTITION: u64 = 4;
    pub const ATTACK: u64 = 5;
    pub const INIT: u64 = 6;
    pub const MONTE_CARLO: u64 = 7;
    pub const TRUST: u64 = 8;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent stream keyed by `(seed, keys...)`.
pub fn substream(seed: u64, keys: &[u64]) -> SimRng {
    let mut h = splitmix64(seed);
    for &k in keys {
        h = splitmix64(h ^ splitmix64(k));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(h);
    rng.set_stream(splitmix64(h ^ 0x5eed));
    rng
}
