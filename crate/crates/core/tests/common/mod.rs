//! Independent flood computations shared by the oracle and acceptance tests.

use std::collections::HashSet;

use gossipchain::adversary::AttackSpec;
use gossipchain::gossip::{forward_probability, DisseminationProtocol};
use gossipchain::rng::{rng_for, Purpose, RngStream};
use gossipchain::topology::Overlay;
use gossipchain::{NodeId, SimConfig};

/// Nodes reachable from `origin` in at most `ttl` hops. Attackers absorb
/// messages from the target: they are never counted and never pass them on.
pub fn bfs_reach(overlay: &Overlay, attack: &AttackSpec, origin: NodeId, ttl: u32) -> u32 {
    let filtered =
        |v: NodeId| attack.enabled() && origin == attack.target() && attack.is_attacker(v);
    let mut dist = vec![u32::MAX; overlay.len()];
    dist[origin.index()] = 0;
    let mut frontier = vec![origin];
    let mut count = 0;
    for d in 1..=ttl {
        let mut next = Vec::new();
        for &u in &frontier {
            for &v in overlay.neighbors(u) {
                if dist[v.index()] == u32::MAX && !filtered(v) {
                    dist[v.index()] = d;
                    count += 1;
                    next.push(v);
                }
            }
        }
        frontier = next;
    }
    count
}

/// Step-by-step replay of the probabilistic flood for a single origin and no
/// blocks, drawing relay coins in the same per-node order as the engine.
pub fn replay_flood(
    config: &SimConfig,
    overlay: &Overlay,
    attack: &AttackSpec,
    protocol: &DisseminationProtocol,
) -> Vec<u32> {
    let n = overlay.len();
    let origin = config.tx_schedule.origin;
    let mut rngs: Vec<RngStream> = (0..n as u32)
        .map(|i| rng_for(config.master_seed, NodeId(i), Purpose::Gossip))
        .collect();
    let mut seen: Vec<HashSet<u32>> = vec![HashSet::new(); n];
    let mut reached = Vec::new();
    // (sender, dest, tx index, ttl left)
    let mut wire: Vec<(NodeId, NodeId, u32, u32)> = Vec::new();
    for t in 0..config.end_clock.0 {
        let mut inbox: Vec<Vec<(NodeId, u32, u32)>> = vec![Vec::new(); n];
        for (s, d, k, ttl) in wire.drain(..) {
            if !(attack.enabled() && attack.is_attacker(d) && origin == attack.target()) {
                inbox[d.index()].push((s, k, ttl));
            }
        }
        let mut out = Vec::new();
        for v in 0..n {
            inbox[v].sort();
            let node = NodeId(v as u32);
            for &(s, k, ttl) in &inbox[v] {
                if !seen[v].insert(k) {
                    continue;
                }
                reached[k as usize] += 1;
                if ttl == 0 {
                    continue;
                }
                let p = forward_probability(protocol, overlay.neighbors(node).len()).unwrap();
                for &w in overlay.neighbors(node) {
                    if w != s && rngs[v].chance(p) {
                        out.push((node, w, k, ttl - 1));
                    }
                }
            }
        }
        let k = reached.len() as u32;
        if t % config.tx_schedule.period == 0 && k < config.tx_schedule.count {
            seen[origin.index()].insert(k);
            reached.push(0);
            for &w in overlay.neighbors(origin) {
                out.push((origin, w, k, config.ttl - 1));
            }
        }
        out.sort_by_key(|&(s, ..)| s);
        wire = out;
    }
    reached
}
