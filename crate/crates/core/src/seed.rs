//! Deterministic seed derivation and the crate-wide generator type.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator used everywhere randomness is needed.
pub type SeededRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(label: &str) -> u64 {
    label.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Mixes a master seed, a cycle index and a label into a child seed.
///
/// Stable across platforms and compiler versions (no `std` hashers).
pub fn derive_seed(master: u64, cycle: usize, label: &str) -> u64 {
    let a = splitmix64(master);
    let b = splitmix64(a ^ (cycle as u64).wrapping_mul(0xA24B_AED4_963E_E407));
    splitmix64(b ^ fnv1a(label))
}
