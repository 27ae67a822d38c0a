//! Seeded random streams.
//!
//! Each node draws from its own ChaCha stream keyed by the run seed and
//! selected by the node label, so a draw is a function of (seed, node,
//! counter) and nothing the scheduler does can perturb it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::NodeId;

/// Stream index reserved for the scheduler.
const ADVERSARY_STREAM: u64 = u64::MAX;
/// Stream index reserved for Byzantine message generators.
const BYZANTINE_STREAM: u64 = u64::MAX - 1;

/// A node's private random stream.
#[derive(Clone, Debug)]
pub struct NodeRng(ChaCha8Rng);

impl NodeRng {
    pub fn for_node(seed: u64, node: NodeId) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(node as u64);
        NodeRng(rng)
    }

    pub fn unit(&mut self) -> f64 {
        self.0.gen::<f64>()
    }

    pub fn bit(&mut self) -> u8 {
        self.0.gen_range(0..2)
    }

    pub(crate) fn position(&self) -> u128 {
        self.0.get_word_pos()
    }
}

/// The scheduler's random stream for a run.
pub fn adversary_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(ADVERSARY_STREAM);
    rng
}

/// A fresh stream for one Byzantine datagram, determined by
/// (seed, sender, receiver, tick).
pub fn byzantine_rng(seed: u64, sender: NodeId, receiver: NodeId, tick: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(sender as u64).to_le_bytes());
    key[16..24].copy_from_slice(&(receiver as u64).to_le_bytes());
    key[24..].copy_from_slice(&tick.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(BYZANTINE_STREAM);
    rng
}

/// Derives an independent per-run seed from a base seed and an index.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_stream(index);
    rng.gen()
}
