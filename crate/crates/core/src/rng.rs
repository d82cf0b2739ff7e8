//! Deterministic random streams keyed by lineage.
//!
//! Every consumer of randomness asks for a stream by `(master_seed, node,
//! purpose)`. The key of the underlying ChaCha generator is derived from the
//! seed and node; the purpose selects one of ChaCha's independent 64-bit
//! streams. Nothing depends on which worker thread owns the agent, so results
//! do not change with the worker count.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::types::NodeId;

/// What a stream is used for. Codes are part of the reproducibility contract
/// and must never be renumbered.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Purpose {
    Topology,
    MinerSelection,
    AttackerSelection,
    Gossip,
    Mining,
    /// Free-form purpose, for tests and extensions.
    Custom(u32),
}

impl Purpose {
    fn code(self) -> u64 {
        match self {
            Purpose::Topology => 1,
            Purpose::MinerSelection => 2,
            Purpose::AttackerSelection => 3,
            Purpose::Gossip => 4,
            Purpose::Mining => 5,
            Purpose::Custom(c) => 0x1_0000_0000 | c as u64,
        }
    }
}

/// Lineage of a stream, kept for diagnostics.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Lineage {
    pub master_seed: u64,
    /// `None` for run-global streams (topology, miner selection, ...).
    pub node: Option<NodeId>,
    pub purpose: Purpose,
}

/// Owned deterministic generator. Implements [`RngCore`] so `rand`'s
/// distributions and slice helpers work on it directly.
#[derive(Clone, Debug)]
pub struct RngStream {
    inner: ChaCha8Rng,
    lineage: Lineage,
}

// splitmix64 finalizer
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl RngStream {
    fn from_lineage(lineage: Lineage) -> Self {
        let node_word = lineage.node.map_or(u64::MAX, |n| n.0 as u64);
        let mut key = [0u8; 32];
        let mut state = mix(lineage.master_seed) ^ mix(node_word.rotate_left(17));
        for chunk in key.chunks_exact_mut(8) {
            state = mix(state);
            chunk.copy_from_slice(&state.to_le_bytes());
        }
        let mut inner = ChaCha8Rng::from_seed(key);
        inner.set_stream(lineage.purpose.code());
        RngStream { inner, lineage }
    }

    /// Stream not tied to any agent.
    pub fn global(master_seed: u64, purpose: Purpose) -> Self {
        Self::from_lineage(Lineage {
            master_seed,
            node: None,
            purpose,
        })
    }

    pub fn lineage(&self) -> Lineage {
        self.lineage
    }

    /// Bernoulli draw. `p >= 1` and `p <= 0` are decided without consuming
    /// randomness.
    #[inline]
    pub fn chance(&mut self, p: f64) -> bool {
        if p >= 1.0 {
            true
        } else if p <= 0.0 || p.is_nan() {
            false
        } else {
            self.inner.gen::<f64>() < p
        }
    }
}

/// Per-agent stream for `purpose`.
pub fn rng_for(master_seed: u64, node: NodeId, purpose: Purpose) -> RngStream {
    RngStream::from_lineage(Lineage {
        master_seed,
        node: Some(node),
        purpose,
    })
}

impl RngCore for RngStream {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.inner.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand::Error> {
        self.inner.try_fill_bytes(dest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prefix(mut s: RngStream) -> Vec<u64> {
        (0..64).map(|_| s.next_u64()).collect()
    }

    #[test]
    fn identical_lineage_replays() {
        let a = prefix(rng_for(42, NodeId(7), Purpose::Gossip));
        let b = prefix(rng_for(42, NodeId(7), Purpose::Gossip));
        assert_eq!(a, b);
    }

    #[test]
    fn node_changes_stream() {
        let a = prefix(rng_for(42, NodeId(7), Purpose::Gossip));
        let b = prefix(rng_for(42, NodeId(8), Purpose::Gossip));
        assert!(a.iter().zip(&b).all(|(x, y)| x != y));
    }

    #[test]
    fn purpose_changes_stream() {
        let a = prefix(rng_for(42, NodeId(7), Purpose::Gossip));
        let b = prefix(rng_for(42, NodeId(7), Purpose::Mining));
        assert!(a.iter().zip(&b).all(|(x, y)| x != y));
    }

    #[test]
    fn global_differs_from_agent_streams() {
        let g = prefix(RngStream::global(42, Purpose::Gossip));
        let a = prefix(rng_for(42, NodeId(0), Purpose::Gossip));
        assert_ne!(g, a);
    }

    #[test]
    fn chance_extremes_do_not_draw() {
        let mut s = rng_for(1, NodeId(0), Purpose::Gossip);
        let before = s.clone();
        assert!(s.chance(1.0));
        assert!(!s.chance(0.0));
        assert_eq!(prefix(s), prefix(before));
    }
}
