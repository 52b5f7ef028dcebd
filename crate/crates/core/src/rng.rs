//! Deterministic random streams.
//!
//! Every source of randomness in the crate is a ChaCha8 stream derived from
//! a 64-bit seed plus a stream id, so changing how one consumer draws (e.g.
//! lot sampling) can never shift the draws seen by another (e.g. noise).

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream id for parameter initialization.
pub const STREAM_INIT: u64 = 0;
/// Stream id for Poisson lot sampling.
pub const STREAM_SAMPLE: u64 = 1;
/// Stream id for Gaussian noise.
pub const STREAM_NOISE: u64 = 2;
/// Stream id for corpus/value generation.
pub const STREAM_CORPUS: u64 = 3;

/// A seeded ChaCha8 stream, domain-separated by `stream`.
pub fn seeded(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// FNV-1a over raw bytes; used wherever a stable string-derived seed is
/// needed (std hashers are not guaranteed stable across releases).
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}
