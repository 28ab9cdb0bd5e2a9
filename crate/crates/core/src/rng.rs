//! Seeded random streams.
//!
//! Every run derives all of its randomness from one master seed. Each purpose
//! (parameter init, minibatch shuffling, sample generation, ...) gets its own
//! stream so that adding draws to one never perturbs another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Well-known stream names.
pub mod streams {
    pub const INIT: &str = "init";
    pub const SHUFFLE: &str = "shuffle";
    pub const SAMPLING: &str = "sampling";
    pub const RESAMPLE: &str = "resample";
    pub const EVAL: &str = "eval";
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(name: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Derive the seed of the named stream from a master seed.
pub fn derive_seed(master: u64, name: &str) -> u64 {
    splitmix64(splitmix64(master) ^ fnv1a(name))
}

/// A generator for the named stream.
pub fn stream(master: u64, name: &str) -> StreamRng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, name))
}

/// A generator for the named stream, further split by an index (e.g. a seed
/// replicate or a group number).
pub fn substream(master: u64, name: &str, index: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(splitmix64(derive_seed(master, name) ^ splitmix64(index)))
}
