//! Seeded randomness.
//!
//! Every stochastic operation takes an explicit `u64` seed and builds a
//! [`SimRng`] from it. `SimRng` is ChaCha with 8 rounds (`rand_chacha`),
//! whose output stream is fixed by its specification and identical on all
//! platforms. Independent sub-streams (per client, per restart, per grid
//! cell) are obtained with [`derive_seed`], a SplitMix64 fold over a path of
//! integer tags, so that adding or removing one consumer never shifts the
//! stream seen by another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Stream tags used with [`derive_seed`].
pub mod stream {
    pub const PARTITION: u64 = 0x5041_5254;
    pub const MASK: u64 = 0x4d41_534b;
    pub const CLIENT_TRAIN: u64 = 0x5452_4149;
    pub const CLIENT_SAMPLE: u64 = 0x5341_4d50;
    pub const CLIENT_CLUSTER: u64 = 0x434c_5553;
    pub const SERVER: u64 = 0x5345_5256;
    pub const RESTART: u64 = 0x5245_5354;
}

pub fn seeded(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from `base` and a path of tags.
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(base), |acc, &tag| splitmix64(acc ^ splitmix64(tag)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn derived_seeds_are_stable_and_distinct() {
        let a = derive_seed(7, &[stream::CLIENT_TRAIN, 0]);
        let b = derive_seed(7, &[stream::CLIENT_TRAIN, 1]);
        let c = derive_seed(8, &[stream::CLIENT_TRAIN, 0]);
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_eq!(a, derive_seed(7, &[stream::CLIENT_TRAIN, 0]));
    }

    const PINNED_FIRST_DRAW: u64 = 12578764544318200737;

    #[test]
    fn chacha_stream_is_pinned() {
        // Regression pin: a change of generator or seeding scheme would
        // silently alter every experiment.
        let mut rng = seeded(42);
        let first: u64 = rng.random();
        assert_eq!(first, PINNED_FIRST_DRAW);
    }
}
