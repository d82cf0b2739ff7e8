//! Deterministic, time-stepped simulator of a proof-of-work peer-to-peer
//! network under a filtering denial-of-service attack.
//!
//! Nodes are agents on a static random overlay. Transactions and blocks
//! spread by TTL-bounded probabilistic gossip, one hop per step; miners find
//! blocks by a per-step Bernoulli trial calibrated to Bitcoin's difficulty
//! and hashrate; a set of attackers silently drops everything one target
//! node originates. The [`metrics`] module measures how many nodes each
//! message reached.
//!
//! ```
//! use gossipchain::{config::SimConfig, engine::SimState};
//!
//! let config = SimConfig::default()
//!     .with_overrides(["NODES=200", "END_CLOCK=100", "TX_PERIOD=20", "TX_COUNT=5", "DISSEMINATION=0"])
//!     .unwrap();
//! let mut sim = SimState::from_config(config).unwrap();
//! sim.run_to_end();
//! let metrics = sim.metrics();
//! assert!(metrics.transactions().all(|r| r.reached == 199));
//! ```

pub mod adversary;
pub mod chain;
pub mod config;
pub mod engine;
pub mod gossip;
pub mod metrics;
pub mod report;
pub mod rng;
pub mod sweep;
pub mod topology;
pub mod types;

pub use config::{parse_config, SimConfig};
pub use engine::{run, SimState};
pub use types::{BlockId, MessageId, MessageKind, NodeId, TimeStep, TxId};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/intro.md")]
    mod intro {}
    #[doc = include_str!("../../../book/src/overlay.md")]
    mod overlay {}
    #[doc = include_str!("../../../book/src/gossip.md")]
    mod gossip {}
    #[doc = include_str!("../../../book/src/chain.md")]
    mod chain {}
    #[doc = include_str!("../../../book/src/attack.md")]
    mod attack {}
    #[doc = include_str!("../../../book/src/engine.md")]
    mod engine {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
