//! Deterministic random substreams.
//!
//! Every Monte Carlo replication owns a 64-bit seed derived from
//! `(base_seed, p, n, rep)` by a SplitMix64 chain. The seed keys a ChaCha20
//! generator, whose output is a pure function of (key, stream, word position),
//! so the draws of a replication do not depend on which worker runs it or when.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Stream ids used inside one replication's key.
pub(crate) const STREAM_SIGNAL: u64 = 0;
pub(crate) const STREAM_START_VECTOR: u64 = 1;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replication `rep` of cell `(p, n)` under `base_seed`.
pub fn substream_seed(base_seed: u64, p: usize, n: usize, rep: usize) -> u64 {
    [p as u64, n as u64, rep as u64]
        .iter()
        .fold(splitmix64(base_seed), |acc, &v| splitmix64(acc ^ splitmix64(v)))
}

/// Generator for stream `stream` of the replication keyed by `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
