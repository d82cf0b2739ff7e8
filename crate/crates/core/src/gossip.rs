//! TTL-bounded probabilistic flooding.
//!
//! A node accepts a message the first time it sees its id, then relays it to
//! each neighbor other than the sender with a protocol-dependent probability.
//! Every hop decrements `ttl` and increments `hop`; a message arriving with
//! `ttl == 0` is accepted but not relayed.

use std::collections::HashSet;

use thiserror::Error;

use crate::rng::RngStream;
use crate::topology::Overlay;
use crate::types::{MessageId, MessageKind, NodeId};

#[derive(Debug, Error, PartialEq)]
pub enum GossipError {
    #[error("unknown degree-dependent probability function {0}")]
    UnknownFunction(u32),
    #[error("sender degree must be ≥ 1")]
    ZeroDegree,
    #[error("ttl must be ≥ 1")]
    ZeroTtl,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct GossipMessage {
    pub id: MessageId,
    pub origin: NodeId,
    pub kind: MessageKind,
    /// Id of the carried transaction or block.
    pub payload_ref: u64,
    pub ttl: u32,
    pub hop: u32,
}

impl GossipMessage {
    fn next_hop(self) -> GossipMessage {
        GossipMessage {
            ttl: self.ttl - 1,
            hop: self.hop + 1,
            ..self
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DisseminationProtocol {
    Broadcast,
    FixedProbability(f64),
    DegreeDependent {
        func_id: u32,
        coeff_higher: f64,
        /// Percent scale.
        coeff_lower: f64,
    },
}

/// Probability that a node of degree `sender_degree` relays to any one
/// neighbor.
///
/// The degree-dependent function `2` is `min(1, coeff_higher / d +
/// coeff_lower / 100)`: well-connected nodes relay less eagerly, with a floor
/// of `coeff_lower` percent.
pub fn forward_probability(
    protocol: &DisseminationProtocol,
    sender_degree: usize,
) -> Result<f64, GossipError> {
    if sender_degree == 0 {
        return Err(GossipError::ZeroDegree);
    }
    match *protocol {
        DisseminationProtocol::Broadcast => Ok(1.0),
        DisseminationProtocol::FixedProbability(p) => Ok(p.clamp(0.0, 1.0)),
        DisseminationProtocol::DegreeDependent {
            func_id: 2,
            coeff_higher,
            coeff_lower,
        } => Ok((coeff_higher / sender_degree as f64 + coeff_lower / 100.0).min(1.0)),
        DisseminationProtocol::DegreeDependent { func_id, .. } => {
            Err(GossipError::UnknownFunction(func_id))
        }
    }
}

/// Message ids a node has already accepted. Entries are never removed.
#[derive(Clone, Debug, Default)]
pub struct RelayCache {
    seen: HashSet<MessageId>,
}

impl RelayCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn contains(&self, id: MessageId) -> bool {
        self.seen.contains(&id)
    }

    /// Returns `true` on first insertion.
    pub fn insert(&mut self, id: MessageId) -> bool {
        self.seen.insert(id)
    }

    pub fn len(&self) -> usize {
        self.seen.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seen.is_empty()
    }
}

/// Mints message ids for one origin.
#[derive(Clone, Copy, Debug, Default)]
pub struct MessageSeq(u32);

impl MessageSeq {
    pub fn next(&mut self, origin: NodeId) -> MessageId {
        let id = MessageId::new(origin, self.0);
        self.0 += 1;
        id
    }
}

/// Creates a fresh message at `origin` and records it in the origin's cache,
/// so the origin never counts as reached by its own message.
pub fn inject(
    seq: &mut MessageSeq,
    cache: &mut RelayCache,
    origin: NodeId,
    kind: MessageKind,
    payload_ref: u64,
    ttl: u32,
) -> Result<GossipMessage, GossipError> {
    if ttl < 1 {
        return Err(GossipError::ZeroTtl);
    }
    let msg = GossipMessage {
        id: seq.next(origin),
        origin,
        kind,
        payload_ref,
        ttl,
        hop: 0,
    };
    cache.insert(msg.id);
    Ok(msg)
}

/// Initial fan-out of a freshly injected message: one copy to every neighbor.
pub fn originate(msg: &GossipMessage, overlay: &Overlay) -> Vec<(NodeId, GossipMessage)> {
    let copy = msg.next_hop();
    overlay
        .neighbors(msg.origin)
        .iter()
        .map(|&dest| (dest, copy))
        .collect()
}

/// Result of handing a message to a node.
#[derive(Clone, Debug, PartialEq)]
pub enum Reception {
    /// Already seen; ignored.
    Duplicate,
    /// First reception; the node relays to these destinations (possibly none).
    Accepted(Vec<(NodeId, GossipMessage)>),
}

impl Reception {
    pub fn relays(&self) -> &[(NodeId, GossipMessage)] {
        match self {
            Reception::Duplicate => &[],
            Reception::Accepted(r) => r,
        }
    }
}

/// Processes one delivered message at `node`.
///
/// `protocol` must have been validated (see [`forward_probability`]); an
/// unknown function id is reported as an error before any relay is drawn.
#[allow(clippy::too_many_arguments)]
pub fn on_receive(
    cache: &mut RelayCache,
    msg: &GossipMessage,
    node: NodeId,
    sender: NodeId,
    overlay: &Overlay,
    protocol: &DisseminationProtocol,
    rng: &mut RngStream,
) -> Result<Reception, GossipError> {
    if !cache.insert(msg.id) {
        return Ok(Reception::Duplicate);
    }
    if msg.ttl == 0 {
        return Ok(Reception::Accepted(Vec::new()));
    }
    let neighbors = overlay.neighbors(node);
    let p = forward_probability(protocol, neighbors.len())?;
    let copy = msg.next_hop();
    let relays = neighbors
        .iter()
        .filter(|&&dest| dest != sender)
        .filter(|_| rng.chance(p))
        .map(|&dest| (dest, copy))
        .collect();
    Ok(Reception::Accepted(relays))
}
