//! Seed derivation helpers.
//!
//! Every random stream in the harness is derived from a single root seed
//! plus a list of domain labels, so that independent components never
//! share or race on generator state.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// splitmix64 finalizer; good avalanche, cheap, stable across platforms.
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// FNV-1a over a byte string, for folding labels into a seed.
pub fn hash_label(label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Mix a root seed with a domain label and an index into a fresh subseed.
pub fn derive_seed(root: u64, label: &str, index: u64) -> u64 {
    splitmix64(root ^ splitmix64(hash_label(label)) ^ splitmix64(index.wrapping_mul(0x9e37_79b9)))
}

/// Deterministic generator for a (root, label, index) stream.
pub fn derive_rng(root: u64, label: &str, index: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(derive_seed(root, label, index))
}
