//! Counter-based random streams.
//!
//! Every random draw in the crate comes from a ChaCha stream addressed by
//! `(master seed, substream name, replica, particle)`. The ChaCha block
//! counter makes a stream a pure function of its address, so trajectories do
//! not depend on thread scheduling or on the order particles are visited.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Substream carrying the initial positions of the interacting cloud.
pub const INIT: &str = "init";
/// Substream carrying Brownian increments.
pub const NOISE: &str = "noise";
/// Substream for the initial positions of reference (oracle) clouds.
pub const REFERENCE_INIT: &str = "reference-init";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub master_seed: u64,
    pub replica: u64,
    substream: [u8; 32],
}

impl StreamKey {
    pub fn new(master_seed: u64, substream: &str) -> Self {
        Self::with_replica(master_seed, substream, 0)
    }

    pub fn with_replica(master_seed: u64, substream: &str, replica: u64) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(master_seed.to_le_bytes());
        hasher.update(replica.to_le_bytes());
        hasher.update((substream.len() as u64).to_le_bytes());
        hasher.update(substream.as_bytes());
        let digest = hasher.finalize();
        let mut key = [0u8; 32];
        key.copy_from_slice(&digest);
        Self { master_seed, replica, substream: key }
    }

    /// Independent stream for one particle identity.
    pub fn particle(&self, id: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.substream);
        rng.set_stream(id);
        rng
    }
}
