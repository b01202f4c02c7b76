//! Named, reproducible random sub-streams derived from one master seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used everywhere in the crate.
pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

/// Seed for the sub-stream `stream` of `master`.
pub fn derive(master: u64, stream: &str) -> u64 {
    splitmix64(master ^ splitmix64(fnv1a(stream)))
}

/// Seed for item `index` of an already derived stream.
pub fn derive_indexed(stream_seed: u64, index: u64) -> u64 {
    splitmix64(stream_seed ^ splitmix64(index.wrapping_add(0x632B_E59B_D9B4_E019)))
}

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
