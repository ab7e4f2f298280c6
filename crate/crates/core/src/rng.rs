//! Counter-style random streams: one independent ChaCha stream per
//! (master seed, path index, purpose), so results do not depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    /// Initial regime draw.
    Start = 0,
    /// Regime holding times.
    Regime = 1,
    /// Brownian increments of the surplus.
    Noise = 2,
    /// Uniform draws fed to the action sampler.
    Action = 3,
    /// Historical path used for parameter estimation.
    History = 4,
}

const PURPOSES: u64 = 8;

/// Independent stream for `(master, index, purpose)`.
pub fn stream(master: u64, index: u64, purpose: Purpose) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index.wrapping_mul(PURPOSES).wrapping_add(purpose as u64));
    rng
}

/// Derives a sub-seed for a named experiment phase from a master seed.
pub fn subseed(master: u64, tag: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = master ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
