//! Deterministic seeding helpers. Every randomized stage derives its RNG
//! from an explicit seed so reruns are bit-identical.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The workspace-standard RNG.
pub type Rng = ChaCha8Rng;

/// RNG from a bare seed.
pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives a stream seed from a base seed and a label, so independent
/// stages (per model, per label, per stage name) get decorrelated but
/// reproducible streams.
pub fn derive(base: u64, label: &str) -> u64 {
    // FNV-1a over the label, folded with the base.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ base.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    for b in label.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// RNG for a named substream.
pub fn derived(base: u64, label: &str) -> Rng {
    seeded(derive(base, label))
}
