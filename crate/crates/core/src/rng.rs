//! Reproducible random streams.
//!
//! Every random operation takes an explicit generator. Independent streams
//! (one per Monte Carlo replicate, for instance) are derived from a base seed
//! with [`mix`], so results never depend on execution order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator used throughout the crate.
pub type StreamRng = ChaCha8Rng;

/// SplitMix64 finalizer applied to `base ^ f(stream)`.
pub fn mix(base: u64, stream: u64) -> u64 {
    let mut z = base ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generator seeded directly from `seed`.
pub fn rng_from_seed(seed: u64) -> StreamRng {
    StreamRng::seed_from_u64(seed)
}

/// Generator for stream `stream` under `base`.
pub fn stream(base: u64, stream: u64) -> StreamRng {
    StreamRng::seed_from_u64(mix(base, stream))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_distinct_and_reproducible() {
        let a: u64 = stream(7, 0).random();
        let b: u64 = stream(7, 1).random();
        let a2: u64 = stream(7, 0).random();
        assert_ne!(a, b);
        assert_eq!(a, a2);
        assert_ne!(mix(0, 0), mix(0, 1));
        assert_ne!(mix(1, 0), mix(0, 0));
    }
}
