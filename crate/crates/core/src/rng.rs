//! Seed derivation.
//!
//! Every random draw in the crate comes from a ChaCha stream keyed by
//! `(seed, domain)` with the stream index selecting the item (segment, tree,
//! epoch, ...). Parallel work therefore never depends on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Domains keep unrelated consumers of the same user seed apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Noise = 1,
    Waveform = 2,
    EventPlan = 3,
    Split = 4,
    Folds = 5,
    Bootstrap = 6,
    FeatureSample = 7,
    ConvBank = 8,
    Shuffle = 9,
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(seed: u64, domain: Domain, index: u64) -> u64 {
    mix64(mix64(seed ^ mix64(domain as u64)) ^ index)
}

pub fn stream(seed: u64, domain: Domain, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(mix64(seed ^ mix64(domain as u64)));
    rng.set_stream(index);
    rng
}
