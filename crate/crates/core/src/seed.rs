//! Seed-stream derivation. Every random process in a run draws from a stream
//! seeded by `derive_seed(root, role)`, so streams are independent of how many
//! workers consume them or in which order they are created.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stable 64-bit hash of `(root, role)`: FNV-1a over the bytes, finalized with splitmix64.
pub fn derive_seed(root: u64, role: &str) -> u64 {
    let mut h = FNV_OFFSET;
    for b in root.to_le_bytes().iter().chain(role.as_bytes()) {
        h ^= u64::from(*b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    splitmix64(h)
}

/// Seed for the `index`-th item of a role, e.g. the 17th training sample of epoch 3.
pub fn derive_indexed(root: u64, role: &str, index: u64) -> u64 {
    splitmix64(derive_seed(root, role) ^ splitmix64(index))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
