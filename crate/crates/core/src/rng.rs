//! Seeded random streams.
//!
//! Every stream is a ChaCha8 keystream. The 256-bit key is the run seed as a
//! little-endian `u64` in bytes 0..8 followed by 24 zero bytes; the stream id
//! selects the ChaCha stream (nonce). Words are consumed as little-endian
//! `u64`s, so another implementation of ChaCha8 reproduces the same draws.
//!
//! Uniform integers in `[lo, hi]` are `lo + ((x * (hi - lo + 1)) >> 64)` with
//! `x` the next 64-bit word and the product taken in 128 bits.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// Stream id of the Distributor-wide recognition delays.
pub const DISTRIBUTOR_STREAM: u64 = 0;

/// Stream id for per-step jitter and dispatch of `core`.
pub fn core_path_stream(core: usize) -> u64 {
    1 + core as u64
}

/// Stream id for interconnect contention samples of `core`.
pub fn contention_stream(core: usize) -> u64 {
    16 + core as u64
}

/// Stream id for memory-stressor samples seen by `core`.
pub fn memory_stream(core: usize) -> u64 {
    32 + core as u64
}

#[derive(Debug, Clone)]
pub struct Stream {
    inner: ChaCha8Rng,
}

impl Stream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        let mut inner = ChaCha8Rng::from_seed(key);
        inner.set_stream(stream);
        Stream { inner }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform integer in the closed range `[lo, hi]`.
    pub fn uniform(&mut self, lo: u64, hi: u64) -> u64 {
        debug_assert!(lo <= hi);
        if lo == hi {
            return lo;
        }
        let span = u128::from(hi - lo) + 1;
        lo + ((u128::from(self.next_u64()) * span) >> 64) as u64
    }
}
