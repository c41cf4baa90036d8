//! Counter-based seed derivation.
//!
//! Every random stream in an experiment is seeded from a stable hash of its
//! identity (base seed, stream label, agent name, run index), never from a
//! shared generator. The scheduling of runs across threads therefore cannot
//! change any result.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Incremental stable hasher. Unlike `std::hash::DefaultHasher` its output is
/// fixed across toolchains and platforms.
#[derive(Debug, Clone, Copy)]
pub struct StreamKey(u64);

impl StreamKey {
    pub fn new(base_seed: u64) -> Self {
        StreamKey(mix(base_seed ^ GOLDEN))
    }

    pub fn with_u64(self, value: u64) -> Self {
        StreamKey(mix(self.0.wrapping_add(GOLDEN) ^ mix(value)))
    }

    pub fn with_str(self, label: &str) -> Self {
        // length prefix keeps ("ab", "c") distinct from ("a", "bc")
        let mut key = self.with_u64(label.len() as u64);
        for chunk in label.as_bytes().chunks(8) {
            let mut word = [0u8; 8];
            word[..chunk.len()].copy_from_slice(chunk);
            key = key.with_u64(u64::from_le_bytes(word));
        }
        key
    }

    pub fn seed(self) -> u64 {
        self.0
    }

    pub fn rng(self) -> SimRng {
        SimRng::seed_from_u64(self.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn keys_are_stable_and_distinct() {
        let a = StreamKey::new(7).with_str("channel").with_u64(3).seed();
        let b = StreamKey::new(7).with_str("channel").with_u64(3).seed();
        assert_eq!(a, b);
        assert_ne!(a, StreamKey::new(7).with_str("channel").with_u64(4).seed());
        assert_ne!(a, StreamKey::new(8).with_str("channel").with_u64(3).seed());
        assert_ne!(
            StreamKey::new(0).with_str("ab").with_str("c").seed(),
            StreamKey::new(0).with_str("a").with_str("bc").seed()
        );
    }

    #[test]
    fn frozen_value() {
        // Guards against accidental changes to the derivation: traces written
        // by earlier builds must stay reproducible.
        let mut rng = StreamKey::new(1).with_str("ltsla").with_u64(0).rng();
        let first: u64 = rng.random();
        let again: u64 = StreamKey::new(1).with_str("ltsla").with_u64(0).rng().random();
        assert_eq!(first, again);
        assert_eq!(mix(0), 0);
        assert_eq!(mix(1), 0x5692_161D_100B_05E5);
    }
}
