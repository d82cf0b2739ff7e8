//! Run configuration and its plain-text `KEY=VALUE` file format.
//!
//! Keys mirror the classic Bitcoin-snapshot parameter table (`TTL`,
//! `DISSEMINATION`, ..., `EDGES_PER_NODE`) plus the knobs this simulator adds
//! (seeds, workers, transaction schedule, attack). Absent keys take the
//! values in [`SimConfig::default`]. Lines starting with `#` are comments;
//! trailing `# ...` comments are also stripped.

use std::fmt::Write as _;
use std::str::FromStr;

use thiserror::Error;

use crate::gossip::DisseminationProtocol;
use crate::types::{NodeId, TimeStep};

/// `DISSEMINATION` selector codes understood by this simulator.
pub mod dissemination_code {
    /// Relay every first reception to every neighbor.
    pub const BROADCAST: u32 = 0;
    /// Relay to each neighbor with probability `FORWARD_PROBABILITY`.
    pub const FIXED_PROBABILITY: u32 = 1;
    /// Relay probability is a function of the relaying node's degree,
    /// selected by `PROBABILITY_FUNCTION`.
    pub const DEGREE_DEPENDENT: u32 = 7;
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected KEY=VALUE, got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key {key}")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key {key} given more than once")]
    Duplicate { line: usize, key: String },
    #[error("{key}: cannot parse {value:?}: {reason}")]
    Malformed {
        key: &'static str,
        value: String,
        reason: String,
    },
    #[error("{key}: {message}")]
    Constraint { key: &'static str, message: String },
}

/// Periodic transaction emission from a single origin. Emission `k` (0-based)
/// fires at step `k * period`, for `k < count` and while the clock is below
/// `END_CLOCK`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TxSchedule {
    pub origin: NodeId,
    pub period: u64,
    pub count: u32,
}

impl TxSchedule {
    /// Index (1-based) of the emission firing at `step`, if any.
    pub fn emission_at(&self, step: TimeStep) -> Option<u32> {
        if !step.0.is_multiple_of(self.period) {
            return None;
        }
        let k = step.0 / self.period;
        (k < self.count as u64).then(|| k as u32 + 1)
    }
}

/// Filtering-attack parameters as they appear in the config file.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AttackParams {
    pub enabled: bool,
    pub target: NodeId,
    pub count: u32,
    /// Seed for attacker placement; `None` reuses `MASTER_SEED`.
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub ttl: u32,
    pub dissemination: u32,
    pub probability_function: u32,
    pub func_coeff_higher: f64,
    /// Percent scale: `74` means 0.74.
    pub func_coeff_lower: f64,
    /// Used only by the fixed-probability protocol.
    pub forward_probability: f64,
    pub end_clock: TimeStep,
    pub nodes: u32,
    /// Share of nodes that mine, as an integer percentage in `1..=100`.
    pub miners_percent: u32,
    pub difficulty: f64,
    /// Whole-network hashrate in hashes per second.
    pub total_hashrate: f64,
    pub edges_per_node: u32,
    pub master_seed: u64,
    pub workers: u32,
    pub tx_schedule: TxSchedule,
    /// `None` means a block takes the whole mempool.
    pub max_txs_per_block: Option<u32>,
    pub attack: AttackParams,
    /// Print progress to stderr every this many steps; 0 disables it.
    pub progress_interval: u64,
    /// Per-event records are kept only for networks up to this size.
    pub event_log_max_nodes: u32,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            ttl: 16,
            dissemination: dissemination_code::DEGREE_DEPENDENT,
            probability_function: 2,
            func_coeff_higher: 4.0,
            func_coeff_lower: 74.0,
            forward_probability: 1.0,
            end_clock: TimeStep(5000),
            nodes: 10_000,
            miners_percent: 70,
            difficulty: 6_489_747_252_517.0,
            total_hashrate: 43_983_561_622_000_000_000.0,
            edges_per_node: 8,
            master_seed: 1,
            workers: 1,
            tx_schedule: TxSchedule {
                origin: NodeId(0),
                period: 35,
                count: 140,
            },
            max_txs_per_block: None,
            attack: AttackParams {
                enabled: true,
                target: NodeId(0),
                count: 0,
                seed: None,
            },
            progress_interval: 0,
            event_log_max_nodes: 200,
        }
    }
}

/// Every accepted key, in rendering order.
pub const KEYS: &[&str] = &[
    "TTL",
    "DISSEMINATION",
    "PROBABILITY_FUNCTION",
    "FUNC_COEFF_HIGHER",
    "FUNC_COEFF_LOWER",
    "FORWARD_PROBABILITY",
    "END_CLOCK",
    "NODES",
    "MINERS_COUNT",
    "DIFFICULTY",
    "HASHRATE",
    "EDGES_PER_NODE",
    "MASTER_SEED",
    "WORKERS",
    "TX_ORIGIN",
    "TX_PERIOD",
    "TX_COUNT",
    "MAX_TXS_PER_BLOCK",
    "ATTACK_ENABLED",
    "ATTACK_TARGET",
    "ATTACK_COUNT",
    "ATTACK_SEED",
    "PROGRESS_INTERVAL",
    "EVENT_LOG_MAX_NODES",
];

fn canonical_key(key: &str) -> Option<&'static str> {
    KEYS.iter().copied().find(|k| *k == key)
}

fn parse_num<T: FromStr>(key: &'static str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse::<T>().map_err(|e| ConfigError::Malformed {
        key,
        value: value.to_string(),
        reason: e.to_string(),
    })
}

fn parse_bool(key: &'static str, value: &str) -> Result<bool, ConfigError> {
    match value {
        "1" | "true" | "yes" => Ok(true),
        "0" | "false" | "no" => Ok(false),
        _ => Err(ConfigError::Malformed {
            key,
            value: value.to_string(),
            reason: "expected 0/1 or true/false".into(),
        }),
    }
}

fn constraint(key: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Constraint {
        key,
        message: message.into(),
    }
}

impl SimConfig {
    /// Sets one key from its textual value. Does not re-validate; call
    /// [`SimConfig::validate`] after a batch of updates.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let Some(key) = canonical_key(key) else {
            return Err(ConfigError::UnknownKey {
                line: 0,
                key: key.to_string(),
            });
        };
        let value = value.trim();
        match key {
            "TTL" => self.ttl = parse_num(key, value)?,
            "DISSEMINATION" => self.dissemination = parse_num(key, value)?,
            "PROBABILITY_FUNCTION" => self.probability_function = parse_num(key, value)?,
            "FUNC_COEFF_HIGHER" => self.func_coeff_higher = parse_num(key, value)?,
            "FUNC_COEFF_LOWER" => self.func_coeff_lower = parse_num(key, value)?,
            "FORWARD_PROBABILITY" => self.forward_probability = parse_num(key, value)?,
            "END_CLOCK" => self.end_clock = TimeStep(parse_num(key, value)?),
            "NODES" => self.nodes = parse_num(key, value)?,
            "MINERS_COUNT" => {
                self.miners_percent = parse_num(key, value.strip_suffix('%').unwrap_or(value))?
            }
            "DIFFICULTY" => self.difficulty = parse_num(key, value)?,
            "HASHRATE" => self.total_hashrate = parse_num(key, value)?,
            "EDGES_PER_NODE" => self.edges_per_node = parse_num(key, value)?,
            "MASTER_SEED" => self.master_seed = parse_num(key, value)?,
            "WORKERS" => self.workers = parse_num(key, value)?,
            "TX_ORIGIN" => self.tx_schedule.origin = NodeId(parse_num(key, value)?),
            "TX_PERIOD" => self.tx_schedule.period = parse_num(key, value)?,
            "TX_COUNT" => self.tx_schedule.count = parse_num(key, value)?,
            "MAX_TXS_PER_BLOCK" => {
                let n: u32 = parse_num(key, value)?;
                self.max_txs_per_block = (n > 0).then_some(n);
            }
            "ATTACK_ENABLED" => self.attack.enabled = parse_bool(key, value)?,
            "ATTACK_TARGET" => self.attack.target = NodeId(parse_num(key, value)?),
            "ATTACK_COUNT" => self.attack.count = parse_num(key, value)?,
            "ATTACK_SEED" => self.attack.seed = Some(parse_num(key, value)?),
            "PROGRESS_INTERVAL" => self.progress_interval = parse_num(key, value)?,
            "EVENT_LOG_MAX_NODES" => self.event_log_max_nodes = parse_num(key, value)?,
            _ => unreachable!("key table and match arms out of sync: {key}"),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.ttl < 1 {
            return Err(constraint("TTL", "ttl must be ≥ 1"));
        }
        if self.nodes < 2 {
            return Err(constraint("NODES", "nodes must be ≥ 2"));
        }
        if self.edges_per_node < 1 || self.edges_per_node >= self.nodes {
            return Err(constraint(
                "EDGES_PER_NODE",
                format!("edges per node must be in [1, nodes) = [1, {})", self.nodes),
            ));
        }
        if !(1..=100).contains(&self.miners_percent) {
            return Err(constraint(
                "MINERS_COUNT",
                "miner percentage must be in 1..=100",
            ));
        }
        if !(self.difficulty > 0.0 && self.difficulty.is_finite()) {
            return Err(constraint("DIFFICULTY", "difficulty must be > 0"));
        }
        if !(self.total_hashrate > 0.0 && self.total_hashrate.is_finite()) {
            return Err(constraint("HASHRATE", "hashrate must be > 0"));
        }
        if self.workers < 1 || self.workers > self.nodes {
            return Err(constraint("WORKERS", "workers must be in [1, nodes]"));
        }
        match self.dissemination {
            dissemination_code::BROADCAST
            | dissemination_code::FIXED_PROBABILITY
            | dissemination_code::DEGREE_DEPENDENT => {}
            other => {
                return Err(constraint(
                    "DISSEMINATION",
                    format!("unsupported dissemination protocol {other} (known: 0, 1, 7)"),
                ))
            }
        }
        if self.probability_function != 2 {
            return Err(constraint(
                "PROBABILITY_FUNCTION",
                format!(
                    "unsupported probability function {} (known: 2)",
                    self.probability_function
                ),
            ));
        }
        if !(self.func_coeff_higher >= 0.0 && self.func_coeff_higher.is_finite()) {
            return Err(constraint("FUNC_COEFF_HIGHER", "coefficient must be ≥ 0"));
        }
        if !(self.func_coeff_lower >= 0.0 && self.func_coeff_lower.is_finite()) {
            return Err(constraint("FUNC_COEFF_LOWER", "coefficient must be ≥ 0"));
        }
        if !(0.0..=1.0).contains(&self.forward_probability) {
            return Err(constraint(
                "FORWARD_PROBABILITY",
                "probability must be in [0, 1]",
            ));
        }
        if self.tx_schedule.origin.0 >= self.nodes {
            return Err(constraint("TX_ORIGIN", "origin must be < nodes"));
        }
        if self.tx_schedule.period < 1 {
            return Err(constraint("TX_PERIOD", "period must be ≥ 1"));
        }
        if self.attack.target.0 >= self.nodes {
            return Err(constraint("ATTACK_TARGET", "target must be < nodes"));
        }
        if self.attack.count > self.nodes - 1 {
            return Err(constraint(
                "ATTACK_COUNT",
                format!("attacker count must be ≤ nodes − 1 = {}", self.nodes - 1),
            ));
        }
        if self.end_clock.0 > u32::MAX as u64 {
            return Err(constraint("END_CLOCK", "end clock must fit in 32 bits"));
        }
        Ok(())
    }

    /// Applies `KEY=VALUE` overrides on top of this config, then validates.
    pub fn with_overrides<'a>(
        mut self,
        overrides: impl IntoIterator<Item = &'a str>,
    ) -> Result<Self, ConfigError> {
        for item in overrides {
            let Some((k, v)) = item.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line: 0,
                    text: item.to_string(),
                });
            };
            self.set(k.trim(), v)?;
        }
        self.validate()?;
        Ok(self)
    }

    pub fn miners_fraction(&self) -> f64 {
        self.miners_percent as f64 / 100.0
    }

    /// `⌊nodes × miners_fraction⌋`, computed in integers.
    pub fn miner_count(&self) -> u32 {
        (self.nodes as u64 * self.miners_percent as u64 / 100) as u32
    }

    /// Seed used for attacker placement.
    pub fn attack_seed(&self) -> u64 {
        self.attack.seed.unwrap_or(self.master_seed)
    }

    pub fn protocol(&self) -> DisseminationProtocol {
        match self.dissemination {
            dissemination_code::BROADCAST => DisseminationProtocol::Broadcast,
            dissemination_code::FIXED_PROBABILITY => {
                DisseminationProtocol::FixedProbability(self.forward_probability)
            }
            _ => DisseminationProtocol::DegreeDependent {
                func_id: self.probability_function,
                coeff_higher: self.func_coeff_higher,
                coeff_lower: self.func_coeff_lower,
            },
        }
    }

    /// Renders every key, so the output fully reproduces this config.
    pub fn render(&self) -> String {
        let mut out = String::from("# effective configuration\n");
        for key in KEYS {
            let value = match *key {
                "TTL" => self.ttl.to_string(),
                "DISSEMINATION" => self.dissemination.to_string(),
                "PROBABILITY_FUNCTION" => self.probability_function.to_string(),
                "FUNC_COEFF_HIGHER" => self.func_coeff_higher.to_string(),
                "FUNC_COEFF_LOWER" => self.func_coeff_lower.to_string(),
                "FORWARD_PROBABILITY" => self.forward_probability.to_string(),
                "END_CLOCK" => self.end_clock.0.to_string(),
                "NODES" => self.nodes.to_string(),
                "MINERS_COUNT" => self.miners_percent.to_string(),
                "DIFFICULTY" => self.difficulty.to_string(),
                "HASHRATE" => self.total_hashrate.to_string(),
                "EDGES_PER_NODE" => self.edges_per_node.to_string(),
                "MASTER_SEED" => self.master_seed.to_string(),
                "WORKERS" => self.workers.to_string(),
                "TX_ORIGIN" => self.tx_schedule.origin.to_string(),
                "TX_PERIOD" => self.tx_schedule.period.to_string(),
                "TX_COUNT" => self.tx_schedule.count.to_string(),
                "MAX_TXS_PER_BLOCK" => self.max_txs_per_block.unwrap_or(0).to_string(),
                "ATTACK_ENABLED" => u8::from(self.attack.enabled).to_string(),
                "ATTACK_TARGET" => self.attack.target.to_string(),
                "ATTACK_COUNT" => self.attack.count.to_string(),
                "ATTACK_SEED" => match self.attack.seed {
                    Some(s) => s.to_string(),
                    None => continue,
                },
                "PROGRESS_INTERVAL" => self.progress_interval.to_string(),
                "EVENT_LOG_MAX_NODES" => self.event_log_max_nodes.to_string(),
                _ => unreachable!(),
            };
            let _ = writeln!(out, "{key}={value}");
        }
        out
    }
}

/// Parses a config document. Absent keys keep their defaults; unknown or
/// repeated keys are rejected.
pub fn parse_config(text: &str) -> Result<SimConfig, ConfigError> {
    let mut config = SimConfig::default();
    let mut seen: Vec<&'static str> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError::Syntax {
                line: line_no,
                text: raw.to_string(),
            });
        };
        let key = key.trim();
        let Some(canonical) = canonical_key(key) else {
            return Err(ConfigError::UnknownKey {
                line: line_no,
                key: key.to_string(),
            });
        };
        if seen.contains(&canonical) {
            return Err(ConfigError::Duplicate {
                line: line_no,
                key: key.to_string(),
            });
        }
        seen.push(canonical);
        config.set(canonical, value)?;
    }
    config.validate()?;
    Ok(config)
}
