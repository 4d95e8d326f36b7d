//! Named, reproducible random streams.
//!
//! Every sampled experiment draws from a ChaCha8 generator keyed by the run
//! seed, with the stream number derived from a fixed name. Two experiments
//! with the same seed never share a stream, and reordering code that uses
//! different names cannot change either sequence.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// FNV-1a over the stream name.
fn stream_id(name: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

pub fn stream(seed: u64, name: &str) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id(name));
    rng
}
