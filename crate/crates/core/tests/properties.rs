use std::collections::{HashMap, HashSet};

use gossipchain::adversary::{is_sybil_complete, AttackSpec};
use gossipchain::engine::{run, EventKind, Scenario, SimState};
use gossipchain::metrics::{write_coverage_csv, TableFormat};
use gossipchain::{NodeId, SimConfig};

fn cfg(extra: &[&str]) -> SimConfig {
    let mut base = vec![
        "NODES=200",
        "EDGES_PER_NODE=4",
        "END_CLOCK=300",
        "TX_PERIOD=10",
        "TX_COUNT=20",
    ];
    base.extend_from_slice(extra);
    SimConfig::default().with_overrides(base).unwrap()
}

fn finished(config: SimConfig) -> SimState {
    let mut s = SimState::from_config(config).unwrap();
    s.run_to_end();
    s
}

fn coverage_bytes(s: &SimState) -> Vec<u8> {
    let mut buf = Vec::new();
    write_coverage_csv(&mut buf, &s.metrics().records, TableFormat::Csv).unwrap();
    buf
}

#[test]
fn message_conservation() {
    for extra in [
        &["ATTACK_COUNT=60"][..],
        &["DISSEMINATION=1", "FORWARD_PROBABILITY=0.5"],
        &[],
    ] {
        let s = finished(cfg(extra));
        let m = s.metrics();
        let c = m.counters;
        assert_eq!(c.sent, c.delivered + m.in_flight, "{extra:?}");
        assert_eq!(
            c.delivered,
            c.dropped + c.duplicates + c.accepted,
            "{extra:?}"
        );
        let total_reach: u64 = m.records.iter().map(|r| r.reached as u64).sum();
        assert_eq!(total_reach, c.accepted);
    }
}

#[test]
fn worker_count_does_not_change_output() {
    let base = cfg(&["ATTACK_COUNT=50", "MASTER_SEED=9"]);
    let one = finished(base.clone());
    for w in [2, 3, 7] {
        let other = finished(SimConfig {
            workers: w,
            ..base.clone()
        });
        assert_eq!(coverage_bytes(&one), coverage_bytes(&other), "workers={w}");
        assert_eq!(one.chain_dump(), other.chain_dump());
        assert_eq!(one.events(), other.events());
        assert_eq!(
            one.summary(&one.metrics()).render(),
            other.summary(&other.metrics()).render()
        );
    }
}

#[test]
fn coverage_non_decreasing_in_ttl() {
    // Broadcast keeps the relay draws out of the comparison.
    let mut last: Option<Vec<u32>> = None;
    for ttl in 1..=8 {
        let s = finished(cfg(&[
            "DISSEMINATION=0",
            &format!("TTL={ttl}"),
            "ATTACK_COUNT=40",
        ]));
        let reach: Vec<u32> = s.metrics().transactions().map(|r| r.reached).collect();
        if let Some(prev) = &last {
            assert!(prev.iter().zip(&reach).all(|(a, b)| a <= b), "ttl {ttl}");
        }
        last = Some(reach);
    }
}

#[test]
fn full_flood_within_diameter_steps() {
    let s = finished(
        SimConfig::default()
            .with_overrides([
                "NODES=100",
                "DISSEMINATION=0",
                "END_CLOCK=200",
                "TX_PERIOD=10",
                "TX_COUNT=10",
            ])
            .unwrap(),
    );
    let diameter = s.overlay().diameter().unwrap() as u64;
    for r in s.metrics().transactions() {
        assert_eq!(r.reached, 99);
        assert!(r.last_reach_step.0 - r.injected_step.0 <= diameter);
    }
}

#[test]
fn sybil_complete_target_reaches_nobody() {
    let base = cfg(&["MASTER_SEED=4"]);
    let Scenario {
        overlay, protocol, ..
    } = Scenario::from_config(&base).unwrap();
    let ring = overlay.neighbors(NodeId(0)).to_vec();
    let attack = AttackSpec::new(base.nodes, ring, NodeId(0)).unwrap();
    assert!(is_sybil_complete(&overlay, &attack));
    let (log, _) = run(base, overlay, attack, protocol).unwrap();
    assert!(log.transactions().all(|r| r.reached == 0));
    // Blocks from other miners still spread.
    assert!(log
        .records
        .iter()
        .any(|r| r.origin != NodeId(0) && r.reached > 0));
}

#[test]
fn attack_never_increases_coverage() {
    for seed in 1..=4 {
        let base = cfg(&["DISSEMINATION=0", &format!("MASTER_SEED={seed}")]);
        let Scenario {
            overlay, protocol, ..
        } = Scenario::from_config(&base).unwrap();
        let (clean, _) = run(
            base.clone(),
            overlay.clone(),
            AttackSpec::none(base.nodes),
            protocol,
        )
        .unwrap();
        let attacked_cfg = SimConfig {
            attack: gossipchain::config::AttackParams {
                count: 80,
                ..base.attack
            },
            ..base.clone()
        };
        let attack = Scenario::from_config(&attacked_cfg).unwrap().attack;
        let (dirty, _) = run(base, overlay, attack, protocol).unwrap();
        for (a, b) in clean.transactions().zip(dirty.transactions()) {
            assert!(b.reached <= a.reached);
        }
    }
}

#[test]
fn event_log_recount() {
    let c = SimConfig::default()
        .with_overrides([
            "NODES=50",
            "EDGES_PER_NODE=4",
            "END_CLOCK=200",
            "TX_PERIOD=9",
            "ATTACK_COUNT=15",
        ])
        .unwrap();
    let s = finished(c);
    assert!(s.event_logging());
    let mut receivers: HashMap<_, HashSet<NodeId>> = HashMap::new();
    let (mut dropped, mut dups) = (0, 0);
    for e in s.events() {
        match e.kind {
            EventKind::Received { node, msg, .. } => {
                assert!(receivers.entry(msg).or_default().insert(node))
            }
            EventKind::Dropped { .. } => dropped += 1,
            EventKind::Duplicate { .. } => dups += 1,
            _ => {}
        }
    }
    let m = s.metrics();
    for r in &m.records {
        let got = receivers.get(&r.message_id).map_or(0, |s| s.len() as u32);
        assert_eq!(got, r.reached, "{:?}", r.message_id);
        assert!(!receivers
            .get(&r.message_id)
            .is_some_and(|s| s.contains(&r.origin)));
    }
    assert_eq!((dropped, dups), (m.counters.dropped, m.counters.duplicates));
}

#[test]
fn event_log_capped_by_size() {
    let s = finished(cfg(&["EVENT_LOG_MAX_NODES=100"]));
    assert!(!s.event_logging() && s.events().is_empty());
}

#[test]
fn chains_are_valid_and_transaction_unique() {
    let s = finished(cfg(&[
        "END_CLOCK=600",
        "TX_PERIOD=3",
        "TX_COUNT=190",
        "MAX_TXS_PER_BLOCK=4",
    ]));
    for agent in s.agents() {
        let chain: Vec<_> = agent.ledger.tip_chain().collect();
        let mut seen = HashSet::new();
        for pair in chain.windows(2) {
            assert_eq!(pair[0].parent, Some(pair[1].id));
            assert_eq!(pair[0].height, pair[1].height + 1);
            assert!(pair[0].txs.len() <= 4);
        }
        assert!(chain.last().unwrap().id.is_genesis());
        for b in &chain {
            for tx in &b.txs {
                assert!(seen.insert(*tx), "node {} has {tx:?} twice", agent.id);
                assert!(agent.ledger.is_confirmed(*tx));
            }
        }
        assert!(agent.ledger.mempool().iter().all(|tx| !seen.contains(tx)));
    }
}

#[test]
fn fixed_probability_zero_stops_at_first_hop() {
    let s = finished(cfg(&["DISSEMINATION=1", "FORWARD_PROBABILITY=0"]));
    let origin_degree = s.overlay().neighbors(NodeId(0)).len() as u32;
    assert!(s
        .metrics()
        .transactions()
        .all(|r| r.reached == origin_degree));
}
