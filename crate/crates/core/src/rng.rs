//! Seeded randomness.
//!
//! Every stochastic operation in the crate takes an explicit `u64` seed and
//! draws from a ChaCha8 stream, so scans and studies are bit-reproducible.
//! Families of related streams (per-sample, per-cell, per-seed-index) are
//! derived from a master seed with [`mix_seed`], a SplitMix64 finalizer over
//! `master XOR f(index)`.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Build the crate's named PRNG (ChaCha8) from a 64-bit seed.
pub fn make_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derive the `index`-th stream seed from a master seed.
///
/// SplitMix64 finalizer applied to `master ^ (index+1)*GOLDEN`; the +1 keeps
/// index 0 from collapsing to the bare master seed.
pub fn mix_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ (index.wrapping_add(1)).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
