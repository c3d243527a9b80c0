//! Counter-based seed splitting.
//!
//! Every random stream in the crate is derived from one root seed plus a
//! path of labels/counters, so components stay reproducible independently
//! of the order in which they run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn hash_label(label: &str) -> u64 {
    // FNV-1a
    label.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Derive a child seed from `root`, a stream label, and a counter.
pub fn derive(root: u64, label: &str, counter: u64) -> u64 {
    let a = splitmix64(root ^ hash_label(label));
    splitmix64(a ^ splitmix64(counter.wrapping_add(1)))
}

/// RNG for the stream `(root, label, counter)`.
pub fn rng(root: u64, label: &str, counter: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(root, label, counter))
}
