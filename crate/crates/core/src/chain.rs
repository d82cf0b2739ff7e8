//! Per-agent ledger: mempool, statistical proof-of-work, longest-chain rule.
//!
//! Mining is a Bernoulli trial per miner per step with success probability
//! `hashrate × step_seconds / (difficulty × 2³²)`, the per-step share of
//! Bitcoin's expected solve time. No hashes are computed.
//!
//! Fork choice is strict longest chain: the tip moves only to a strictly
//! higher block, so at equal height the first block received stays tip.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::sync::{Arc, OnceLock};

use rand::seq::SliceRandom;
use thiserror::Error;

use crate::config::SimConfig;
use crate::rng::RngStream;
use crate::types::{BlockId, NodeId, TimeStep, TxId};

#[derive(Debug, Error, PartialEq)]
pub enum ChainError {
    #[error("{what} must be > 0, got {value}")]
    NonPositive { what: &'static str, value: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Transaction {
    pub id: TxId,
    pub originator: NodeId,
    pub created_step: TimeStep,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Block {
    pub id: BlockId,
    /// `None` only for genesis.
    pub parent: Option<BlockId>,
    pub height: u64,
    pub miner: NodeId,
    pub txs: Vec<TxId>,
    pub found_step: TimeStep,
}

/// The shared genesis block.
pub fn genesis() -> Arc<Block> {
    static GENESIS: OnceLock<Arc<Block>> = OnceLock::new();
    GENESIS
        .get_or_init(|| {
            Arc::new(Block {
                id: BlockId::GENESIS,
                parent: None,
                height: 0,
                miner: NodeId(u32::MAX),
                txs: Vec::new(),
                found_step: TimeStep(0),
            })
        })
        .clone()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MinerProfile {
    pub node: NodeId,
    /// Hashes per second.
    pub hashrate: f64,
}

/// Picks `⌊nodes × miners_percent⌋` miners by seeded shuffle and splits the
/// total hashrate uniformly. The result is sorted by node id.
pub fn select_miners(config: &SimConfig, rng: &mut RngStream) -> Vec<MinerProfile> {
    let mut ids: Vec<u32> = (0..config.nodes).collect();
    ids.shuffle(rng);
    let count = config.miner_count() as usize;
    let mut chosen = ids[..count].to_vec();
    chosen.sort_unstable();
    let hashrate = if count == 0 {
        0.0
    } else {
        config.total_hashrate / count as f64
    };
    chosen
        .into_iter()
        .map(|n| MinerProfile {
            node: NodeId(n),
            hashrate,
        })
        .collect()
}

/// Per-step success probability of a miner:
/// `min(1, hashrate × step_seconds / (difficulty × 2³²))`.
pub fn block_find_probability(
    hashrate: f64,
    difficulty: f64,
    step_seconds: f64,
) -> Result<f64, ChainError> {
    for (what, value) in [
        ("hashrate", hashrate),
        ("difficulty", difficulty),
        ("step length", step_seconds),
    ] {
        if value.is_nan() || value <= 0.0 {
            return Err(ChainError::NonPositive { what, value });
        }
    }
    Ok((hashrate * step_seconds / (difficulty * 4_294_967_296.0)).min(1.0))
}

/// How [`LedgerState::apply_block`] handled a block.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Adoption {
    /// The tip changed during this call (the block itself, or an orphan it
    /// unblocked, is the new tip).
    AdoptedNewTip,
    StoredSideBranch,
    Duplicate,
    /// Parent unknown; held until the parent arrives.
    OrphanPending,
}

#[derive(Clone, Debug)]
struct KnownBlock {
    block: Arc<Block>,
    first_seen: TimeStep,
}

#[derive(Clone, Debug)]
pub struct LedgerState {
    known: HashMap<BlockId, KnownBlock>,
    tip: BlockId,
    mempool: BTreeSet<TxId>,
    /// Transactions included in the tip chain.
    confirmed: HashSet<TxId>,
    /// Orphans keyed by their missing parent.
    orphans: HashMap<BlockId, Vec<Arc<Block>>>,
    orphan_ids: HashSet<BlockId>,
}

impl Default for LedgerState {
    fn default() -> Self {
        Self::new()
    }
}

impl LedgerState {
    pub fn new() -> Self {
        let g = genesis();
        let mut known = HashMap::new();
        known.insert(
            g.id,
            KnownBlock {
                block: g,
                first_seen: TimeStep(0),
            },
        );
        LedgerState {
            known,
            tip: BlockId::GENESIS,
            mempool: BTreeSet::new(),
            confirmed: HashSet::new(),
            orphans: HashMap::new(),
            orphan_ids: HashSet::new(),
        }
    }

    pub fn tip(&self) -> BlockId {
        self.tip
    }

    pub fn tip_block(&self) -> &Arc<Block> {
        &self.known[&self.tip].block
    }

    pub fn tip_height(&self) -> u64 {
        self.tip_block().height
    }

    pub fn block(&self, id: BlockId) -> Option<&Arc<Block>> {
        self.known.get(&id).map(|k| &k.block)
    }

    pub fn knows(&self, id: BlockId) -> bool {
        self.known.contains_key(&id)
    }

    pub fn known_block_count(&self) -> usize {
        self.known.len()
    }

    pub fn first_seen(&self, id: BlockId) -> Option<TimeStep> {
        self.known.get(&id).map(|k| k.first_seen)
    }

    pub fn mempool(&self) -> &BTreeSet<TxId> {
        &self.mempool
    }

    pub fn orphan_count(&self) -> usize {
        self.orphan_ids.len()
    }

    /// Whether `tx` is included in the current tip chain.
    pub fn is_confirmed(&self, tx: TxId) -> bool {
        self.confirmed.contains(&tx)
    }

    /// Blocks from the tip back to genesis, inclusive.
    pub fn tip_chain(&self) -> impl Iterator<Item = &Arc<Block>> + '_ {
        let mut cursor = Some(self.tip);
        std::iter::from_fn(move || {
            let block = self.block(cursor?)?;
            cursor = block.parent;
            Some(block)
        })
    }

    /// Adds `tx` to the mempool unless it is already pending or confirmed.
    pub fn submit_transaction(&mut self, tx: &Transaction) -> bool {
        if self.confirmed.contains(&tx.id) {
            return false;
        }
        self.mempool.insert(tx.id)
    }

    fn parent_of(&self, id: BlockId) -> BlockId {
        self.known[&id].block.parent.expect("walked past genesis")
    }

    fn height_of(&self, id: BlockId) -> u64 {
        self.known[&id].block.height
    }

    /// Moves the tip and recomputes the mempool: transactions on the
    /// abandoned branch return to the mempool, those on the new branch leave
    /// it.
    fn switch_tip(&mut self, new_tip: BlockId) {
        let (mut old, mut new) = (self.tip, new_tip);
        let mut removed = Vec::new();
        let mut added = Vec::new();
        while self.height_of(old) > self.height_of(new) {
            removed.push(old);
            old = self.parent_of(old);
        }
        while self.height_of(new) > self.height_of(old) {
            added.push(new);
            new = self.parent_of(new);
        }
        while old != new {
            removed.push(old);
            added.push(new);
            old = self.parent_of(old);
            new = self.parent_of(new);
        }
        for id in removed {
            let block = self.known[&id].block.clone();
            for tx in &block.txs {
                self.confirmed.remove(tx);
                self.mempool.insert(*tx);
            }
        }
        for id in added {
            let block = self.known[&id].block.clone();
            for tx in &block.txs {
                self.confirmed.insert(*tx);
                self.mempool.remove(tx);
            }
        }
        self.tip = new_tip;
    }

    fn store(&mut self, block: Arc<Block>, now: TimeStep) -> bool {
        let id = block.id;
        debug_assert_eq!(
            block.parent.map(|p| self.height_of(p) + 1),
            Some(block.height),
            "height must be parent height + 1"
        );
        let higher = block.height > self.tip_height();
        self.known.insert(
            id,
            KnownBlock {
                block,
                first_seen: now,
            },
        );
        if higher {
            self.switch_tip(id);
        }
        higher
    }

    pub fn apply_block(&mut self, block: Arc<Block>, now: TimeStep) -> Adoption {
        if self.known.contains_key(&block.id) || self.orphan_ids.contains(&block.id) {
            return Adoption::Duplicate;
        }
        let Some(parent) = block.parent else {
            // A second genesis can never be valid.
            return Adoption::Duplicate;
        };
        if !self.known.contains_key(&parent) {
            self.orphan_ids.insert(block.id);
            self.orphans.entry(parent).or_default().push(block);
            return Adoption::OrphanPending;
        }
        let before = self.tip;
        let mut ready = vec![block];
        while let Some(b) = ready.pop() {
            let id = b.id;
            self.store(b, now);
            if let Some(children) = self.orphans.remove(&id) {
                for child in children {
                    self.orphan_ids.remove(&child.id);
                    ready.push(child);
                }
            }
        }
        if self.tip != before {
            Adoption::AdoptedNewTip
        } else {
            Adoption::StoredSideBranch
        }
    }
}

/// One mining attempt at step `now`. On success the block extends the
/// current tip and carries the mempool (up to `max_txs_per_block`).
pub fn attempt_mine(
    profile: &MinerProfile,
    ledger: &LedgerState,
    config: &SimConfig,
    rng: &mut RngStream,
    now: TimeStep,
) -> Option<Block> {
    let p = block_find_probability(profile.hashrate, config.difficulty, TimeStep::SECONDS).ok()?;
    if !rng.chance(p) {
        return None;
    }
    let limit = config.max_txs_per_block.map_or(usize::MAX, |m| m as usize);
    let tip = ledger.tip_block();
    Some(Block {
        id: BlockId::mined(now, profile.node),
        parent: Some(tip.id),
        height: tip.height + 1,
        miner: profile.node,
        txs: ledger.mempool().iter().take(limit).copied().collect(),
        found_step: now,
    })
}
