//! Counter-based random streams keyed by (master seed, replication, stream).

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Independent purposes that draw randomness within one replication.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Class = 1,
    Truth = 2,
    Noise = 3,
    Sample = 4,
}

/// Generator for `(seed, replication, stream)`. The result does not depend
/// on how replications are scheduled.
pub fn stream_rng(seed: u64, replication: u64, stream: Stream) -> ChaCha12Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&replication.to_le_bytes());
    let mut rng = ChaCha12Rng::from_seed(key);
    rng.set_stream(stream as u64);
    rng
}
