//! Seeded random-number streams.
//!
//! Every stochastic consumer in this crate draws from a `(seed, stream)`
//! pair. Streams are independent, so growing one consumer's draw count never
//! perturbs another's, and re-running with the same seed reproduces every
//! draw bit for bit.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Stream id for per-shot machine trajectories; shot `k` uses `MACHINE + k`.
pub const STREAM_MACHINE: u64 = 1 << 32;
/// Stream id for quadrature sampling; angle index `a` uses `SAMPLING + a`.
pub const STREAM_SAMPLING: u64 = 2 << 32;

/// Deterministic generator for the given seed and stream.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
