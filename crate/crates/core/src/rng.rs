//! Seeded randomness.
//!
//! Every random stream is a ChaCha8 generator (`rand_chacha::ChaCha8Rng`)
//! seeded through `SeedableRng::seed_from_u64`. Both the algorithm and the
//! seed expansion are specified by the `rand_chacha` crate and produce the
//! same sequence on every platform. Per-item streams are derived by mixing
//! the run seed with a 64-bit FNV-1a hash of a stable key (image id, segment
//! id), so results never depend on scheduling order.

use rand::SeedableRng;
pub use rand_chacha::ChaCha8Rng as Rng;

pub fn rng_from_seed(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// 64-bit FNV-1a.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

/// Stream for one image: `seed ^ fnv1a(image_id)`.
pub fn image_rng(seed: u64, image_id: &str) -> Rng {
    rng_from_seed(seed ^ fnv1a(image_id.as_bytes()))
}

/// Stream for one (image, segment) pair.
pub fn feature_rng(seed: u64, image_id: &str, segment_id: usize) -> Rng {
    let mut key = Vec::with_capacity(image_id.len() + 9);
    key.extend_from_slice(image_id.as_bytes());
    key.push(0);
    key.extend_from_slice(&(segment_id as u64).to_le_bytes());
    rng_from_seed(seed ^ fnv1a(&key))
}
