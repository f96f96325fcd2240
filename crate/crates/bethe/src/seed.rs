//! Reproducible random streams.
//!
//! Every task derives its generator from a master seed and a `stream_path`
//! (the indices identifying the task: grid cell, trial number, sweep, ...).
//! The pair is hashed with SHA-256 into a ChaCha key, so distinct paths give
//! statistically independent streams without any coordination between
//! workers, and identical paths reproduce identical sample sequences on any
//! platform.

use rand_chacha::ChaCha12Rng;
use rand_chacha::rand_core::SeedableRng;
use sha2::{Digest, Sha256};

/// Master seed plus the stream path identifying one task's random stream.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RealizationSeed {
    pub master_seed: u64,
    pub stream_path: Vec<u64>,
}

impl RealizationSeed {
    pub fn new(master_seed: u64) -> Self {
        Self { master_seed, stream_path: Vec::new() }
    }

    pub fn with_path(master_seed: u64, path: &[u64]) -> Self {
        Self { master_seed, stream_path: path.to_vec() }
    }

    /// Child stream: the same master seed with one more path component.
    pub fn child(&self, index: u64) -> Self {
        let mut path = self.stream_path.clone();
        path.push(index);
        Self { master_seed: self.master_seed, stream_path: path }
    }

    /// The ChaCha key is SHA-256 of the little-endian encoding of
    /// (master_seed, path...). Fixed-width components keep distinct paths
    /// from colliding.
    pub fn key(&self) -> [u8; 32] {
        let mut hasher = Sha256::new();
        hasher.update(self.master_seed.to_le_bytes());
        for p in &self.stream_path {
            hasher.update(p.to_le_bytes());
        }
        hasher.finalize().into()
    }

    pub fn rng(&self) -> ChaCha12Rng {
        ChaCha12Rng::from_seed(self.key())
    }
}
