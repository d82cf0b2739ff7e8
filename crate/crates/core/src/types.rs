//! Identifiers shared by every layer of the simulator.

use std::fmt;

/// Dense index of a simulated node, in `[0, nodes)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl From<usize> for NodeId {
    fn from(i: usize) -> Self {
        NodeId(u32::try_from(i).expect("node index exceeds u32"))
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Simulated clock value. One step is one simulated minute.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TimeStep(pub u64);

impl TimeStep {
    /// Wall-clock span of one step, in simulated seconds.
    pub const SECONDS: f64 = 60.0;

    pub fn next(self) -> TimeStep {
        TimeStep(self.0 + 1)
    }
}

impl fmt::Display for TimeStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Packs an owner node and a per-owner sequence number into one `u64`, so ids
/// can be minted locally by each agent without coordination.
macro_rules! owned_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(pub u64);

        impl $name {
            pub fn new(owner: NodeId, seq: u32) -> Self {
                $name(((owner.0 as u64) << 32) | seq as u64)
            }

            pub fn owner(self) -> NodeId {
                NodeId((self.0 >> 32) as u32)
            }

            pub fn seq(self) -> u32 {
                self.0 as u32
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                self.0.fmt(f)
            }
        }
    };
}

owned_id!(
    /// Gossip envelope identifier: `(origin, per-origin counter)`.
    MessageId
);
owned_id!(
    /// Transaction identifier: `(originator, per-originator counter)`.
    TxId
);

/// Block identifier. Mined blocks are keyed by `(found_step, miner)`, which is
/// unique because a miner gets one attempt per step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BlockId(pub u64);

impl BlockId {
    pub const GENESIS: BlockId = BlockId(u64::MAX);

    pub fn mined(step: TimeStep, miner: NodeId) -> Self {
        let step = u32::try_from(step.0).expect("step exceeds u32");
        BlockId(((step as u64) << 32) | miner.0 as u64)
    }

    pub fn is_genesis(self) -> bool {
        self == Self::GENESIS
    }
}

impl fmt::Display for BlockId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_genesis() {
            f.write_str("genesis")
        } else {
            self.0.fmt(f)
        }
    }
}

/// What a gossip envelope carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MessageKind {
    Transaction,
    Block,
}

impl MessageKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MessageKind::Transaction => "transaction",
            MessageKind::Block => "block",
        }
    }
}

impl fmt::Display for MessageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for MessageKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "transaction" => Ok(MessageKind::Transaction),
            "block" => Ok(MessageKind::Block),
            other => Err(format!("unknown message kind {other:?}")),
        }
    }
}
