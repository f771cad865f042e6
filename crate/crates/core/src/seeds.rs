//! Seed derivation.
//!
//! Every random stream in the pipeline is derived from one master seed by
//! mixing in string tags (module, instance, time label). The mixer is a
//! fixed FNV-1a hash followed by a SplitMix64 finalizer, so derived seeds
//! are stable across platforms and releases.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stable 64-bit hash of a tag.
pub fn hash_tag(tag: &str) -> u64 {
    let h = tag.bytes().fold(FNV_OFFSET, |h, b| (h ^ b as u64).wrapping_mul(FNV_PRIME));
    mix64(h)
}

/// `seed ⊕ hash(tag)`, finalized so nearby seeds do not give nearby streams.
pub fn derive(seed: u64, tag: &str) -> u64 {
    mix64(seed ^ hash_tag(tag))
}

/// Chain of derivations, e.g. `derive_path(master, &["fit", "Shift_1", "3"])`.
pub fn derive_path(seed: u64, tags: &[&str]) -> u64 {
    tags.iter().fold(seed, |s, t| derive(s, t))
}

/// The RNG used everywhere in the crate. ChaCha8 output is specified
/// independently of the `rand` version, unlike `StdRng`.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
