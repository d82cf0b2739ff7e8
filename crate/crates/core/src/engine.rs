//! Time-stepped simulation kernel.
//!
//! Every step runs five phases in order:
//!
//! 1. deliver the messages sent during the previous step, applying the
//!    attack filter at each receiver;
//! 2. each agent drains its inbox, sorted by `(sender, message id)`;
//! 3. scheduled transactions are emitted;
//! 4. miners attempt to extend their tip;
//! 5. outboxes are collected for delivery at the next step.
//!
//! Agents are split into contiguous partitions, one per worker. Phases 1 to 4
//! run partitions in parallel with a barrier after each phase; phase 5 and all
//! merging run on the calling thread in node order. Since every random draw
//! comes from a stream owned by one agent and every merge is ordered by node
//! id, outputs do not depend on the worker count.

use std::collections::HashMap;
use std::ops::Range;
use std::sync::Arc;

use rayon::prelude::*;
use thiserror::Error;

use crate::adversary::{
    filter_decision, is_sybil_complete, select_attackers, AttackError, AttackSpec, Verdict,
};
use crate::chain::{
    attempt_mine, select_miners, Adoption, Block, LedgerState, MinerProfile, Transaction,
};
use crate::config::SimConfig;
use crate::gossip::{
    forward_probability, inject, on_receive, originate, DisseminationProtocol, GossipError,
    GossipMessage, MessageSeq, Reception, RelayCache,
};
use crate::metrics::{
    average_coverage, Counters, CoverageRecord, MetricsLog, MinedBlock, RunSummary,
};
use crate::rng::{rng_for, Purpose, RngStream};
use crate::topology::{generate_overlay, Overlay, TopologyError};
use crate::types::{BlockId, MessageId, MessageKind, NodeId, TimeStep, TxId};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("overlay has {overlay} nodes but NODES={config}")]
    NodeCountMismatch { overlay: u32, config: u32 },
    #[error("workers must be in [1, {n}], got {workers}")]
    BadWorkerCount { workers: u32, n: u32 },
    #[error("clock already at END_CLOCK={0}")]
    PastEnd(TimeStep),
    #[error("miner {0} out of range")]
    BadMiner(NodeId),
    #[error(transparent)]
    Protocol(#[from] GossipError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Attack(#[from] AttackError),
    #[error("failed to start worker pool: {0}")]
    Pool(String),
}

/// Contiguous id range owned by one worker.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    pub worker: usize,
    pub range: Range<u32>,
}

impl Partition {
    pub fn len(&self) -> usize {
        self.range.len()
    }

    pub fn is_empty(&self) -> bool {
        self.range.is_empty()
    }
}

/// Near-equal contiguous ranges; earlier partitions take the remainder.
pub fn partition_nodes(n: u32, workers: u32) -> Result<Vec<Partition>, EngineError> {
    if workers < 1 || workers > n {
        return Err(EngineError::BadWorkerCount { workers, n });
    }
    let base = n / workers;
    let extra = n % workers;
    let mut start = 0;
    Ok((0..workers)
        .map(|w| {
            let len = base + u32::from(w < extra);
            let p = Partition {
                worker: w as usize,
                range: start..start + len,
            };
            start += len;
            p
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EventKind {
    Injected {
        node: NodeId,
        msg: MessageId,
        kind: MessageKind,
    },
    Dropped {
        node: NodeId,
        sender: NodeId,
        msg: MessageId,
    },
    Duplicate {
        node: NodeId,
        sender: NodeId,
        msg: MessageId,
    },
    Received {
        node: NodeId,
        sender: NodeId,
        msg: MessageId,
    },
    Relayed {
        node: NodeId,
        dest: NodeId,
        msg: MessageId,
    },
    Mined {
        node: NodeId,
        block: BlockId,
    },
    TipSwitch {
        node: NodeId,
        block: BlockId,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Event {
    pub step: TimeStep,
    pub kind: EventKind,
}

/// One simulated node.
#[derive(Clone, Debug)]
pub struct AgentState {
    pub id: NodeId,
    pub ledger: LedgerState,
    pub relay_cache: RelayCache,
    pub miner: Option<MinerProfile>,
    /// Last step this node accepted a new block or mined one.
    pub last_block_seen: Option<TimeStep>,
    inbox: Vec<(NodeId, GossipMessage)>,
    outbox: Vec<(NodeId, GossipMessage)>,
    gossip_rng: RngStream,
    mining_rng: RngStream,
    msg_seq: MessageSeq,
    tx_seq: u32,
}

impl AgentState {
    fn new(id: NodeId, master_seed: u64, miner: Option<MinerProfile>) -> Self {
        AgentState {
            id,
            ledger: LedgerState::new(),
            relay_cache: RelayCache::new(),
            miner,
            last_block_seen: None,
            inbox: Vec::new(),
            outbox: Vec::new(),
            gossip_rng: rng_for(master_seed, id, Purpose::Gossip),
            mining_rng: rng_for(master_seed, id, Purpose::Mining),
            msg_seq: MessageSeq::default(),
            tx_seq: 0,
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Envelope {
    sender: NodeId,
    dest: NodeId,
    msg: GossipMessage,
}

#[derive(Clone, Copy, Debug)]
struct Injection {
    id: MessageId,
    origin: NodeId,
    kind: MessageKind,
    step: TimeStep,
}

#[derive(Clone, Copy, Debug, Default)]
struct Reach {
    reached: u32,
    last: TimeStep,
}

/// Read-only view handed to workers during a phase.
struct StepCtx<'a> {
    config: &'a SimConfig,
    overlay: &'a Overlay,
    attack: &'a AttackSpec,
    protocol: &'a DisseminationProtocol,
    blocks: &'a HashMap<BlockId, Arc<Block>>,
    txs: &'a HashMap<TxId, Transaction>,
    now: TimeStep,
    log_events: bool,
}

#[derive(Debug)]
struct Worker {
    partition: Partition,
    agents: Vec<AgentState>,
    inbound: Vec<Envelope>,
    reach: HashMap<MessageId, Reach>,
    injected: Vec<Injection>,
    new_blocks: Vec<Arc<Block>>,
    new_txs: Vec<Transaction>,
    mined: Vec<MinedBlock>,
    events: Vec<Event>,
    counters: Counters,
}

impl Worker {
    fn agent_mut(&mut self, node: NodeId) -> &mut AgentState {
        &mut self.agents[(node.0 - self.partition.range.start) as usize]
    }

    fn log(&mut self, ctx: &StepCtx<'_>, kind: EventKind) {
        if ctx.log_events {
            self.events.push(Event {
                step: ctx.now,
                kind,
            });
        }
    }

    fn record_injection(&mut self, ctx: &StepCtx<'_>, msg: &GossipMessage) {
        self.injected.push(Injection {
            id: msg.id,
            origin: msg.origin,
            kind: msg.kind,
            step: ctx.now,
        });
        self.log(
            ctx,
            EventKind::Injected {
                node: msg.origin,
                msg: msg.id,
                kind: msg.kind,
            },
        );
        for (dest, _) in originate(msg, ctx.overlay) {
            self.log(
                ctx,
                EventKind::Relayed {
                    node: msg.origin,
                    dest,
                    msg: msg.id,
                },
            );
        }
    }

    /// Phases 1 and 2.
    fn deliver_and_process(&mut self, ctx: &StepCtx<'_>) {
        let inbound = std::mem::take(&mut self.inbound);
        for env in &inbound {
            self.agent_mut(env.dest).inbox.push((env.sender, env.msg));
        }
        self.inbound = inbound;
        self.inbound.clear();

        for i in 0..self.agents.len() {
            if self.agents[i].inbox.is_empty() {
                continue;
            }
            let mut inbox = std::mem::take(&mut self.agents[i].inbox);
            inbox.sort_unstable_by_key(|(sender, m)| (*sender, m.id));
            for (sender, msg) in inbox.drain(..) {
                let node = self.agents[i].id;
                self.counters.delivered += 1;
                if filter_decision(ctx.attack, node, &msg) == Verdict::Drop {
                    self.counters.dropped += 1;
                    self.log(
                        ctx,
                        EventKind::Dropped {
                            node,
                            sender,
                            msg: msg.id,
                        },
                    );
                    continue;
                }
                let agent = &mut self.agents[i];
                let reception = on_receive(
                    &mut agent.relay_cache,
                    &msg,
                    node,
                    sender,
                    ctx.overlay,
                    ctx.protocol,
                    &mut agent.gossip_rng,
                )
                .expect("protocol validated at construction");
                let relays = match reception {
                    Reception::Duplicate => {
                        self.counters.duplicates += 1;
                        self.log(
                            ctx,
                            EventKind::Duplicate {
                                node,
                                sender,
                                msg: msg.id,
                            },
                        );
                        continue;
                    }
                    Reception::Accepted(relays) => relays,
                };
                let mut tip_switch = None;
                match msg.kind {
                    MessageKind::Transaction => {
                        let tx = &ctx.txs[&TxId(msg.payload_ref)];
                        agent.ledger.submit_transaction(tx);
                    }
                    MessageKind::Block => {
                        let block = ctx.blocks[&BlockId(msg.payload_ref)].clone();
                        agent.last_block_seen = Some(ctx.now);
                        if agent.ledger.apply_block(block, ctx.now) == Adoption::AdoptedNewTip {
                            tip_switch = Some(agent.ledger.tip());
                        }
                    }
                }
                agent.outbox.extend_from_slice(&relays);

                self.counters.accepted += 1;
                let reach = self.reach.entry(msg.id).or_default();
                reach.reached += 1;
                reach.last = ctx.now;
                self.log(
                    ctx,
                    EventKind::Received {
                        node,
                        sender,
                        msg: msg.id,
                    },
                );
                for (dest, _) in &relays {
                    self.log(
                        ctx,
                        EventKind::Relayed {
                            node,
                            dest: *dest,
                            msg: msg.id,
                        },
                    );
                }
                if let Some(block) = tip_switch {
                    self.log(ctx, EventKind::TipSwitch { node, block });
                }
            }
            self.agents[i].inbox = inbox;
        }
    }

    /// Phase 3.
    fn emit_transactions(&mut self, ctx: &StepCtx<'_>) {
        let schedule = &ctx.config.tx_schedule;
        if !self.partition.range.contains(&schedule.origin.0)
            || schedule.emission_at(ctx.now).is_none()
        {
            return;
        }
        let agent = self.agent_mut(schedule.origin);
        let tx = Transaction {
            id: TxId::new(agent.id, agent.tx_seq),
            originator: agent.id,
            created_step: ctx.now,
        };
        agent.tx_seq += 1;
        agent.ledger.submit_transaction(&tx);
        let msg = inject(
            &mut agent.msg_seq,
            &mut agent.relay_cache,
            agent.id,
            MessageKind::Transaction,
            tx.id.0,
            ctx.config.ttl,
        )
        .expect("ttl validated");
        agent.outbox.extend(originate(&msg, ctx.overlay));
        self.new_txs.push(tx);
        self.record_injection(ctx, &msg);
    }

    /// Phase 4.
    fn mine(&mut self, ctx: &StepCtx<'_>) {
        for i in 0..self.agents.len() {
            let agent = &mut self.agents[i];
            let Some(profile) = agent.miner else { continue };
            let Some(block) = attempt_mine(
                &profile,
                &agent.ledger,
                ctx.config,
                &mut agent.mining_rng,
                ctx.now,
            ) else {
                continue;
            };
            let block = Arc::new(block);
            let adoption = agent.ledger.apply_block(block.clone(), ctx.now);
            debug_assert_eq!(adoption, Adoption::AdoptedNewTip);
            agent.last_block_seen = Some(ctx.now);
            let msg = inject(
                &mut agent.msg_seq,
                &mut agent.relay_cache,
                agent.id,
                MessageKind::Block,
                block.id.0,
                ctx.config.ttl,
            )
            .expect("ttl validated");
            agent.outbox.extend(originate(&msg, ctx.overlay));
            let node = agent.id;
            self.mined.push(MinedBlock {
                id: block.id,
                miner: node,
                height: block.height,
                step: ctx.now,
            });
            self.log(
                ctx,
                EventKind::Mined {
                    node,
                    block: block.id,
                },
            );
            self.log(
                ctx,
                EventKind::TipSwitch {
                    node,
                    block: block.id,
                },
            );
            self.record_injection(ctx, &msg);
            self.new_blocks.push(block);
        }
    }
}

fn for_each_worker<F>(pool: Option<&rayon::ThreadPool>, workers: &mut [Worker], f: F)
where
    F: Fn(&mut Worker) + Send + Sync,
{
    match pool {
        Some(pool) => pool.install(|| workers.par_iter_mut().for_each(&f)),
        None => workers.iter_mut().for_each(f),
    }
}

/// Complete simulation state. Built once per run and advanced by [`SimState::step`].
pub struct SimState {
    config: SimConfig,
    overlay: Arc<Overlay>,
    attack: Arc<AttackSpec>,
    protocol: DisseminationProtocol,
    clock: TimeStep,
    workers: Vec<Worker>,
    owner: Vec<u32>,
    pending: Vec<Envelope>,
    blocks: HashMap<BlockId, Arc<Block>>,
    txs: HashMap<TxId, Transaction>,
    events: Vec<Event>,
    injected: Vec<Injection>,
    mined: Vec<MinedBlock>,
    counters: Counters,
    log_events: bool,
    pool: Option<rayon::ThreadPool>,
}

impl std::fmt::Debug for SimState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SimState")
            .field("clock", &self.clock)
            .field("nodes", &self.config.nodes)
            .field("workers", &self.workers.len())
            .field("pending", &self.pending.len())
            .finish_non_exhaustive()
    }
}

/// Overlay, attack and protocol derived from a config's seeds.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub overlay: Overlay,
    pub attack: AttackSpec,
    pub protocol: DisseminationProtocol,
}

impl Scenario {
    pub fn from_config(config: &SimConfig) -> Result<Self, EngineError> {
        let overlay = generate_overlay(
            config.nodes,
            config.edges_per_node,
            &mut RngStream::global(config.master_seed, Purpose::Topology),
        )?;
        let attack = select_attackers(
            config.nodes,
            config.attack.count,
            config.attack.target,
            &mut RngStream::global(config.attack_seed(), Purpose::AttackerSelection),
        )?
        .with_enabled(config.attack.enabled);
        Ok(Scenario {
            overlay,
            attack,
            protocol: config.protocol(),
        })
    }
}

impl SimState {
    /// Builds the initial state with miners drawn from the config.
    pub fn new(
        config: SimConfig,
        overlay: Overlay,
        attack: AttackSpec,
        protocol: DisseminationProtocol,
    ) -> Result<Self, EngineError> {
        let miners = select_miners(
            &config,
            &mut RngStream::global(config.master_seed, Purpose::MinerSelection),
        );
        Self::with_miners(config, overlay, attack, protocol, miners)
    }

    /// Builds the initial state with an explicit miner set.
    pub fn with_miners(
        config: SimConfig,
        overlay: Overlay,
        attack: AttackSpec,
        protocol: DisseminationProtocol,
        miners: Vec<MinerProfile>,
    ) -> Result<Self, EngineError> {
        let n = config.nodes;
        if overlay.node_count() != n || attack.node_count() != n {
            return Err(EngineError::NodeCountMismatch {
                overlay: overlay.node_count(),
                config: n,
            });
        }
        forward_probability(&protocol, 1)?;
        let mut profile_of: Vec<Option<MinerProfile>> = vec![None; n as usize];
        for m in miners {
            *profile_of
                .get_mut(m.node.index())
                .ok_or(EngineError::BadMiner(m.node))? = Some(m);
        }
        let partitions = partition_nodes(n, config.workers)?;
        let mut owner = vec![0u32; n as usize];
        let workers = partitions
            .into_iter()
            .map(|partition| {
                let agents = partition
                    .range
                    .clone()
                    .map(|i| {
                        owner[i as usize] = partition.worker as u32;
                        AgentState::new(NodeId(i), config.master_seed, profile_of[i as usize])
                    })
                    .collect();
                Worker {
                    partition,
                    agents,
                    inbound: Vec::new(),
                    reach: HashMap::new(),
                    injected: Vec::new(),
                    new_blocks: Vec::new(),
                    new_txs: Vec::new(),
                    mined: Vec::new(),
                    events: Vec::new(),
                    counters: Counters::default(),
                }
            })
            .collect();
        let pool = if config.workers > 1 {
            Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(config.workers as usize)
                    .build()
                    .map_err(|e| EngineError::Pool(e.to_string()))?,
            )
        } else {
            None
        };
        let mut blocks = HashMap::new();
        let g = crate::chain::genesis();
        blocks.insert(g.id, g);
        Ok(SimState {
            log_events: n <= config.event_log_max_nodes,
            config,
            overlay: Arc::new(overlay),
            attack: Arc::new(attack),
            protocol,
            clock: TimeStep(0),
            workers,
            owner,
            pending: Vec::new(),
            blocks,
            txs: HashMap::new(),
            events: Vec::new(),
            injected: Vec::new(),
            mined: Vec::new(),
            counters: Counters::default(),
            pool,
        })
    }

    pub fn from_config(config: SimConfig) -> Result<Self, EngineError> {
        let Scenario {
            overlay,
            attack,
            protocol,
        } = Scenario::from_config(&config)?;
        Self::new(config, overlay, attack, protocol)
    }

    pub fn clock(&self) -> TimeStep {
        self.clock
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn overlay(&self) -> &Overlay {
        &self.overlay
    }

    pub fn attack(&self) -> &AttackSpec {
        &self.attack
    }

    pub fn protocol(&self) -> &DisseminationProtocol {
        &self.protocol
    }

    pub fn is_finished(&self) -> bool {
        self.clock >= self.config.end_clock
    }

    /// Per-event records; empty when the network exceeds `EVENT_LOG_MAX_NODES`.
    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn event_logging(&self) -> bool {
        self.log_events
    }

    pub fn counters(&self) -> Counters {
        self.counters
    }

    /// Messages sent during the last executed step, awaiting delivery.
    pub fn in_flight(&self) -> usize {
        self.pending.len()
    }

    pub fn agents(&self) -> impl Iterator<Item = &AgentState> {
        self.workers.iter().flat_map(|w| w.agents.iter())
    }

    pub fn agent(&self, node: NodeId) -> &AgentState {
        let w = &self.workers[self.owner[node.index()] as usize];
        &w.agents[(node.0 - w.partition.range.start) as usize]
    }

    pub fn block(&self, id: BlockId) -> Option<&Arc<Block>> {
        self.blocks.get(&id)
    }

    fn drain_phase_outputs(&mut self) {
        for w in &mut self.workers {
            self.events.append(&mut w.events);
            self.injected.append(&mut w.injected);
            self.mined.append(&mut w.mined);
            for b in w.new_blocks.drain(..) {
                self.blocks.insert(b.id, b);
            }
            for tx in w.new_txs.drain(..) {
                self.txs.insert(tx.id, tx);
            }
        }
    }

    /// Runs one phase on every worker, then merges its outputs in partition
    /// order.
    fn run_phase(
        &mut self,
        pool: Option<&rayon::ThreadPool>,
        phase: fn(&mut Worker, &StepCtx<'_>),
    ) {
        let ctx = StepCtx {
            config: &self.config,
            overlay: &self.overlay,
            attack: &self.attack,
            protocol: &self.protocol,
            blocks: &self.blocks,
            txs: &self.txs,
            now: self.clock,
            log_events: self.log_events,
        };
        for_each_worker(pool, &mut self.workers, |w| phase(w, &ctx));
        self.drain_phase_outputs();
    }

    /// Advances the clock by one step.
    pub fn step(&mut self) -> Result<(), EngineError> {
        if self.is_finished() {
            return Err(EngineError::PastEnd(self.config.end_clock));
        }
        for env in self.pending.drain(..) {
            self.workers[self.owner[env.dest.index()] as usize]
                .inbound
                .push(env);
        }
        let pool = self.pool.take();
        self.run_phase(pool.as_ref(), Worker::deliver_and_process);
        self.run_phase(pool.as_ref(), Worker::emit_transactions);
        self.run_phase(pool.as_ref(), Worker::mine);
        self.pool = pool;

        // Phase 5: collect outboxes in node order.
        for w in &mut self.workers {
            for agent in &mut w.agents {
                let sender = agent.id;
                self.pending
                    .extend(agent.outbox.drain(..).map(|(dest, msg)| Envelope {
                        sender,
                        dest,
                        msg,
                    }));
            }
        }
        self.counters.sent += self.pending.len() as u64;
        self.clock = self.clock.next();

        let interval = self.config.progress_interval;
        if interval > 0 && (self.clock.0.is_multiple_of(interval) || self.is_finished()) {
            eprintln!(
                "step {}/{} blocks={} in_flight={}",
                self.clock,
                self.config.end_clock,
                self.mined.len(),
                self.pending.len()
            );
        }
        Ok(())
    }

    pub fn run_to_end(&mut self) {
        while !self.is_finished() {
            self.step().expect("clock checked");
        }
    }

    /// Coverage records and counters for everything that happened so far.
    pub fn metrics(&self) -> MetricsLog {
        let mut reach: HashMap<MessageId, Reach> = HashMap::new();
        let mut counters = self.counters;
        for w in &self.workers {
            counters.merge(&w.counters);
            for (id, r) in &w.reach {
                let acc = reach.entry(*id).or_default();
                acc.reached += r.reached;
                acc.last = acc.last.max(r.last);
            }
        }
        let mut injected = self.injected.clone();
        injected.sort_unstable_by_key(|i| (i.step, i.origin, i.id));
        let (mut tx_index, mut block_index) = (0, 0);
        let records = injected
            .iter()
            .map(|i| {
                let index = match i.kind {
                    MessageKind::Transaction => &mut tx_index,
                    MessageKind::Block => &mut block_index,
                };
                *index += 1;
                let r = reach.get(&i.id).copied().unwrap_or_default();
                CoverageRecord {
                    message_index: *index,
                    message_id: i.id,
                    origin: i.origin,
                    kind: i.kind,
                    reached: r.reached,
                    injected_step: i.step,
                    last_reach_step: if r.reached > 0 { r.last } else { i.step },
                }
            })
            .collect();
        let mut blocks = self.mined.clone();
        blocks.sort_unstable_by_key(|b| (b.step, b.miner));
        MetricsLog::new(
            self.config.nodes,
            self.clock.0,
            records,
            blocks,
            counters,
            self.pending.len() as u64,
        )
    }

    /// Headline numbers; mean coverage is over transactions from `TX_ORIGIN`.
    pub fn summary(&self, metrics: &MetricsLog) -> RunSummary {
        let origin = self.config.tx_schedule.origin;
        RunSummary {
            nodes: self.config.nodes,
            steps: metrics.steps,
            blocks_mined: metrics.blocks.len(),
            mean_block_interval: metrics.mean_block_interval(),
            max_tip_height: self
                .agents()
                .map(|a| a.ledger.tip_height())
                .max()
                .unwrap_or(0),
            target: self.attack.target(),
            attackers: if self.attack.enabled() {
                self.attack.attackers().len()
            } else {
                0
            },
            sybil_complete: is_sybil_complete(&self.overlay, &self.attack),
            target_transactions: metrics
                .transactions()
                .filter(|r| r.origin == origin)
                .count(),
            mean_coverage: average_coverage(&metrics.records, origin).ok(),
            counters: metrics.counters,
        }
    }

    /// `(node, tip, height)` for every node, in node order.
    pub fn chain_dump(&self) -> Vec<(NodeId, BlockId, u64)> {
        self.agents()
            .map(|a| (a.id, a.ledger.tip(), a.ledger.tip_height()))
            .collect()
    }
}

/// Runs `config.end_clock` steps from a fresh state.
pub fn run(
    config: SimConfig,
    overlay: Overlay,
    attack: AttackSpec,
    protocol: DisseminationProtocol,
) -> Result<(MetricsLog, SimState), EngineError> {
    let mut state = SimState::new(config, overlay, attack, protocol)?;
    state.run_to_end();
    Ok((state.metrics(), state))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(nodes: u32, end: u64) -> SimConfig {
        SimConfig {
            nodes,
            edges_per_node: 3,
            end_clock: TimeStep(end),
            ..SimConfig::default()
        }
    }

    #[test]
    fn partition_sizes() {
        let sizes = |n, w| {
            partition_nodes(n, w)
                .unwrap()
                .iter()
                .map(Partition::len)
                .collect::<Vec<_>>()
        };
        assert_eq!(
            partition_nodes(10, 1).unwrap(),
            vec![Partition {
                worker: 0,
                range: 0..10
            }]
        );
        assert_eq!(sizes(10, 3), vec![4, 3, 3]);
        assert_eq!(sizes(10_000, 4), vec![2500; 4]);
        let parts = partition_nodes(17, 5).unwrap();
        assert!(parts.windows(2).all(|w| w[0].range.end == w[1].range.start));
        assert_eq!(parts.last().unwrap().range.end, 17);
        assert!(partition_nodes(10, 0).is_err());
        assert!(partition_nodes(10, 11).is_err());
    }

    #[test]
    fn zero_steps_means_nothing_happens() {
        let (metrics, state) = {
            let c = small(20, 0);
            let s = Scenario::from_config(&c).unwrap();
            run(c, s.overlay, s.attack, s.protocol).unwrap()
        };
        assert!(metrics.records.is_empty());
        assert!(metrics.blocks.is_empty());
        assert_eq!(metrics.counters, Counters::default());
        assert!(state.events().is_empty());
        assert_eq!(state.clock(), TimeStep(0));
    }

    #[test]
    fn step_past_end_is_an_error() {
        let mut s = SimState::from_config(small(10, 1)).unwrap();
        s.step().unwrap();
        assert!(matches!(s.step(), Err(EngineError::PastEnd(TimeStep(1)))));
    }

    #[test]
    fn mismatched_overlay_rejected() {
        let c = small(10, 1);
        let err = SimState::new(
            c,
            Overlay::complete(5),
            AttackSpec::none(10),
            DisseminationProtocol::Broadcast,
        )
        .unwrap_err();
        assert!(matches!(err, EngineError::NodeCountMismatch { .. }));
    }

    #[test]
    fn idle_step_only_moves_clock() {
        let c = SimConfig {
            tx_schedule: crate::config::TxSchedule {
                count: 0,
                ..small(10, 3).tx_schedule
            },
            ..small(10, 3)
        };
        let o = Overlay::complete(10);
        let mut s = SimState::with_miners(
            c,
            o,
            AttackSpec::none(10),
            DisseminationProtocol::Broadcast,
            vec![],
        )
        .unwrap();
        s.step().unwrap();
        assert_eq!(s.clock(), TimeStep(1));
        assert!(s.events().is_empty());
        assert_eq!(s.in_flight(), 0);
    }

    #[test]
    fn single_broadcast_fan_out() {
        // 0 - 1 - {2, 3}: node 1 has degree 3 and receives from neighbor 0.
        let o = Overlay::from_edges(4, [(0, 1), (1, 2), (1, 3)]).unwrap();
        let c = SimConfig {
            tx_schedule: crate::config::TxSchedule {
                origin: NodeId(0),
                period: 100,
                count: 1,
            },
            ..small(4, 2)
        };
        let mut s = SimState::with_miners(
            c,
            o,
            AttackSpec::none(4),
            DisseminationProtocol::Broadcast,
            vec![],
        )
        .unwrap();
        s.step().unwrap();
        assert_eq!(s.in_flight(), 1);
        s.step().unwrap();
        // node 1 relays to 2 and 3, never back to the sender
        assert_eq!(s.in_flight(), 2);
        let dests: Vec<_> = s.pending.iter().map(|e| e.dest).collect();
        assert_eq!(dests, vec![NodeId(2), NodeId(3)]);
    }

    #[test]
    fn stepping_equals_running() {
        let c = small(30, 2);
        let sc = Scenario::from_config(&c).unwrap();
        let (_, ran) = run(
            c.clone(),
            sc.overlay.clone(),
            sc.attack.clone(),
            sc.protocol,
        )
        .unwrap();
        let mut stepped = SimState::new(c, sc.overlay, sc.attack, sc.protocol).unwrap();
        stepped.step().unwrap();
        stepped.step().unwrap();
        assert_eq!(ran.events(), stepped.events());
        assert!(!ran.events().is_empty());
    }
}
