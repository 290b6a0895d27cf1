//! Named, independent random streams derived from one master seed.
//!
//! Each purpose gets its own ChaCha stream so that, for example, switching on
//! background noise never perturbs which patterns are generated.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Stream {
    Pattern = 1,
    Noise = 2,
    Lifetimes = 3,
    Experiment = 4,
    Calibration = 5,
}

/// Rng for `(master seed, purpose, job index)`.
pub fn stream_rng(seed: u64, stream: Stream, index: u64) -> SimRng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&index.to_le_bytes());
    key[16..24].copy_from_slice(&(stream as u64).to_le_bytes());
    key[24..].copy_from_slice(b"cstdp-v1");
    ChaCha8Rng::from_seed(key)
}
