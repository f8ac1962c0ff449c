//! Counter-based seed derivation.
//!
//! Every random decision in a run draws from a stream keyed by the root seed
//! and a path of integer labels (party id, level, user index, ...). Streams
//! never depend on iteration order, so results are identical for any thread
//! count or scheduling.

use rand::SeedableRng;
use rand_pcg::Pcg64Mcg;

/// Generator used for every derived stream.
pub type StreamRng = Pcg64Mcg;

/// Stateless 64-bit finaliser (SplitMix64 output function).
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A node in the seed derivation tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RunSeed(pub u64);

impl RunSeed {
    pub fn new(seed: u64) -> Self {
        RunSeed(seed)
    }

    /// Child seed for `label`.
    #[inline]
    pub fn child(self, label: u64) -> RunSeed {
        RunSeed(mix64(self.0 ^ mix64(label.wrapping_add(0x9e37_79b9_7f4a_7c15))))
    }

    /// Child seed for a tagged label, e.g. `("party", 3)`.
    pub fn derive(self, tag: &str, label: u64) -> RunSeed {
        let tag_hash = tag
            .bytes()
            .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3));
        self.child(tag_hash).child(label)
    }

    pub fn rng(self) -> StreamRng {
        StreamRng::seed_from_u64(self.0)
    }
}
