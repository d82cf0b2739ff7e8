//! Attacker-count sweeps: many independent seeded runs, aggregated per count.

use rayon::prelude::*;
use thiserror::Error;

use crate::config::SimConfig;
use crate::engine::{EngineError, SimState};
use crate::metrics::{average_coverage, MetricsError, SweepPoint};

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("attacker count {count} exceeds nodes − 1 = {max}")]
    CountOutOfRange { count: u32, max: u32 },
    #[error("seeds per point must be ≥ 1")]
    NoSeeds,
    #[error("attackers={attackers} seed={seed}: {source}")]
    Engine {
        attackers: u32,
        seed: u64,
        #[source]
        source: EngineError,
    },
    #[error("attackers={attackers} seed={seed}: {source}")]
    Metrics {
        attackers: u32,
        seed: u64,
        #[source]
        source: MetricsError,
    },
}

/// Mean target coverage of one seeded run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeedOutcome {
    pub seed: u64,
    pub target_messages: usize,
    pub mean_reached: f64,
}

/// Config for one sweep run: `seed` drives topology, miners, gossip and
/// attacker placement. Attackers are always enabled.
pub fn run_config(base: &SimConfig, attackers: u32, seed: u64) -> SimConfig {
    let mut config = base.clone();
    config.master_seed = seed;
    config.attack.count = attackers;
    config.attack.seed = None;
    config.attack.enabled = true;
    config
}

/// Seeds used for `count` repetitions: `MASTER_SEED, MASTER_SEED + 1, ...`.
pub fn seeds_for(base: &SimConfig, count: u32) -> Vec<u64> {
    (0..count as u64)
        .map(|i| base.master_seed.wrapping_add(i))
        .collect()
}

pub fn run_seed(base: &SimConfig, attackers: u32, seed: u64) -> Result<SeedOutcome, SweepError> {
    if attackers > base.nodes - 1 {
        return Err(SweepError::CountOutOfRange {
            count: attackers,
            max: base.nodes - 1,
        });
    }
    let config = run_config(base, attackers, seed);
    let target = config.attack.target;
    let mut sim = SimState::from_config(config).map_err(|source| SweepError::Engine {
        attackers,
        seed,
        source,
    })?;
    sim.run_to_end();
    let metrics = sim.metrics();
    let mean =
        average_coverage(&metrics.records, target).map_err(|source| SweepError::Metrics {
            attackers,
            seed,
            source,
        })?;
    Ok(SeedOutcome {
        seed,
        target_messages: metrics
            .transactions()
            .filter(|r| r.origin == target)
            .count(),
        mean_reached: mean,
    })
}

pub fn aggregate(attackers: u32, outcomes: &[SeedOutcome]) -> Option<SweepPoint> {
    let samples: Vec<f64> = outcomes.iter().map(|o| o.mean_reached).collect();
    SweepPoint::from_samples(attackers, &samples)
}

/// Runs every seed for one attacker count, in parallel on the current rayon
/// pool.
pub fn run_point(
    base: &SimConfig,
    attackers: u32,
    seeds: &[u64],
) -> Result<(SweepPoint, Vec<SeedOutcome>), SweepError> {
    if seeds.is_empty() {
        return Err(SweepError::NoSeeds);
    }
    let outcomes = seeds
        .par_iter()
        .map(|&s| run_seed(base, attackers, s))
        .collect::<Result<Vec<_>, _>>()?;
    let point = aggregate(attackers, &outcomes).expect("non-empty");
    Ok((point, outcomes))
}

/// Runs the whole grid. Points come back in grid order.
pub fn run_sweep(
    base: &SimConfig,
    grid: &[u32],
    seeds_per_point: u32,
) -> Result<Vec<SweepPoint>, SweepError> {
    if seeds_per_point == 0 {
        return Err(SweepError::NoSeeds);
    }
    let seeds = seeds_for(base, seeds_per_point);
    grid.par_iter()
        .map(|&a| run_point(base, a, &seeds).map(|(p, _)| p))
        .collect()
}

/// 1-2-5 steps below `nodes / 2`, then steps of `nodes / 40` up to `nodes − 1`.
/// For 10 000 nodes: 0, 1, 2, 5, ..., 2000, then 5000, 5250, ..., 9750, 9999.
pub fn default_grid(nodes: u32) -> Vec<u32> {
    let half = nodes / 2;
    let mut grid = vec![0];
    let mut decade = 1u32;
    'log: loop {
        for m in [1, 2, 5] {
            let v = decade.saturating_mul(m);
            if v >= half {
                break 'log;
            }
            grid.push(v);
        }
        decade = decade.saturating_mul(10);
    }
    let step = (nodes / 40).max(1);
    let mut v = half;
    while v < nodes - 1 {
        grid.push(v);
        v += step;
    }
    grid.push(nodes - 1);
    grid.dedup();
    grid
}
