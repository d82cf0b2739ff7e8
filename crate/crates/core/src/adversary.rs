//! Filtering denial of service.
//!
//! Attackers silently drop every message whose origin is the target and
//! behave honestly otherwise. When all of the target's neighbors are
//! attackers the filter becomes a Sybil isolation: nothing the target
//! originates leaves its neighborhood.

use rand::seq::SliceRandom;
use thiserror::Error;

use crate::gossip::GossipMessage;
use crate::rng::RngStream;
use crate::topology::Overlay;
use crate::types::NodeId;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AttackError {
    #[error("attacker count {count} exceeds nodes − 1 = {max}")]
    CountOutOfRange { count: u32, max: u32 },
    #[error("target {0} cannot be an attacker")]
    TargetIsAttacker(NodeId),
    #[error("node {node} out of range for {n} nodes")]
    NodeOutOfRange { node: NodeId, n: u32 },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AttackSpec {
    attackers: Vec<NodeId>,
    is_attacker: Vec<bool>,
    target: NodeId,
    enabled: bool,
}

impl AttackSpec {
    /// Builds an attack over `n` nodes from an explicit attacker set.
    pub fn new(
        n: u32,
        attackers: impl IntoIterator<Item = NodeId>,
        target: NodeId,
    ) -> Result<Self, AttackError> {
        if target.0 >= n {
            return Err(AttackError::NodeOutOfRange { node: target, n });
        }
        let mut is_attacker = vec![false; n as usize];
        let mut list = Vec::new();
        for a in attackers {
            if a.0 >= n {
                return Err(AttackError::NodeOutOfRange { node: a, n });
            }
            if a == target {
                return Err(AttackError::TargetIsAttacker(a));
            }
            if !std::mem::replace(&mut is_attacker[a.index()], true) {
                list.push(a);
            }
        }
        list.sort_unstable();
        Ok(AttackSpec {
            attackers: list,
            is_attacker,
            target,
            enabled: true,
        })
    }

    /// No attackers at all.
    pub fn none(n: u32) -> Self {
        let mut spec = Self::new(n, [], NodeId(0)).expect("empty attack is valid");
        spec.enabled = false;
        spec
    }

    pub fn with_enabled(mut self, enabled: bool) -> Self {
        self.enabled = enabled;
        self
    }

    pub fn attackers(&self) -> &[NodeId] {
        &self.attackers
    }

    pub fn target(&self) -> NodeId {
        self.target
    }

    pub fn enabled(&self) -> bool {
        self.enabled
    }

    pub fn node_count(&self) -> u32 {
        self.is_attacker.len() as u32
    }

    #[inline]
    pub fn is_attacker(&self, node: NodeId) -> bool {
        self.is_attacker.get(node.index()).copied().unwrap_or(false)
    }
}

/// Draws `count` distinct attackers uniformly from every node but `target`.
///
/// The set is a prefix of one seeded permutation, so for a fixed stream the
/// sets grow by inclusion as `count` grows.
pub fn select_attackers(
    n: u32,
    count: u32,
    target: NodeId,
    rng: &mut RngStream,
) -> Result<AttackSpec, AttackError> {
    if target.0 >= n {
        return Err(AttackError::NodeOutOfRange { node: target, n });
    }
    if count > n - 1 {
        return Err(AttackError::CountOutOfRange { count, max: n - 1 });
    }
    let mut pool: Vec<NodeId> = (0..n).filter(|&i| i != target.0).map(NodeId).collect();
    pool.shuffle(rng);
    AttackSpec::new(n, pool.into_iter().take(count as usize), target)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Deliver,
    Drop,
}

#[inline]
pub fn filter_decision(attack: &AttackSpec, receiver: NodeId, msg: &GossipMessage) -> Verdict {
    if attack.enabled && msg.origin == attack.target && attack.is_attacker(receiver) {
        Verdict::Drop
    } else {
        Verdict::Deliver
    }
}

/// True iff the attack is active and every neighbor of the target is an
/// attacker.
pub fn is_sybil_complete(overlay: &Overlay, attack: &AttackSpec) -> bool {
    let neighbors = overlay.neighbors(attack.target);
    attack.enabled && !neighbors.is_empty() && neighbors.iter().all(|&v| attack.is_attacker(v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Purpose;
    use crate::types::{MessageId, MessageKind};

    fn rng(seed: u64) -> RngStream {
        RngStream::global(seed, Purpose::AttackerSelection)
    }

    fn msg_from(origin: u32) -> GossipMessage {
        GossipMessage {
            id: MessageId::new(NodeId(origin), 0),
            origin: NodeId(origin),
            kind: MessageKind::Transaction,
            payload_ref: 0,
            ttl: 3,
            hop: 1,
        }
    }

    #[test]
    fn all_but_target() {
        let spec = select_attackers(10_000, 9999, NodeId(0), &mut rng(1)).unwrap();
        assert_eq!(spec.attackers().len(), 9999);
        assert!(!spec.is_attacker(NodeId(0)));
        assert!((1..10_000).all(|i| spec.is_attacker(NodeId(i))));
    }

    #[test]
    fn empty_and_out_of_range() {
        let spec = select_attackers(10, 0, NodeId(3), &mut rng(1)).unwrap();
        assert!(spec.attackers().is_empty());
        assert_eq!(
            select_attackers(10, 10, NodeId(3), &mut rng(1)),
            Err(AttackError::CountOutOfRange { count: 10, max: 9 })
        );
        assert_eq!(
            AttackSpec::new(4, [NodeId(1), NodeId(2)], NodeId(2)),
            Err(AttackError::TargetIsAttacker(NodeId(2)))
        );
    }

    #[test]
    fn replayable_and_nested() {
        let a = select_attackers(10_000, 5000, NodeId(0), &mut rng(7)).unwrap();
        let b = select_attackers(10_000, 5000, NodeId(0), &mut rng(7)).unwrap();
        assert_eq!(a, b);
        let smaller = select_attackers(10_000, 1200, NodeId(0), &mut rng(7)).unwrap();
        assert!(smaller.attackers().iter().all(|&x| a.is_attacker(x)));
    }

    #[test]
    fn filter_rules() {
        let spec = AttackSpec::new(5, [NodeId(1), NodeId(2)], NodeId(0)).unwrap();
        assert_eq!(
            filter_decision(&spec, NodeId(1), &msg_from(0)),
            Verdict::Drop
        );
        assert_eq!(
            filter_decision(&spec, NodeId(3), &msg_from(0)),
            Verdict::Deliver
        );
        assert_eq!(
            filter_decision(&spec, NodeId(1), &msg_from(4)),
            Verdict::Deliver
        );
        let off = spec.clone().with_enabled(false);
        assert_eq!(
            filter_decision(&off, NodeId(1), &msg_from(0)),
            Verdict::Deliver
        );
    }

    #[test]
    fn sybil_completeness() {
        let o = Overlay::from_edges(5, [(0, 1), (0, 2), (2, 3), (3, 4)]).unwrap();
        let full = AttackSpec::new(5, [NodeId(1), NodeId(2)], NodeId(0)).unwrap();
        assert!(is_sybil_complete(&o, &full));
        let partial = AttackSpec::new(5, [NodeId(1), NodeId(3)], NodeId(0)).unwrap();
        assert!(!is_sybil_complete(&o, &partial));
        assert!(!is_sybil_complete(
            &o,
            &AttackSpec::new(5, [], NodeId(0)).unwrap()
        ));
        assert!(!is_sybil_complete(&o, &full.with_enabled(false)));
    }
}
