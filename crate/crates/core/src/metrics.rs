//! Coverage records and their CSV forms.
//!
//! Reach of a message is the number of distinct non-origin nodes that
//! accepted it: the filter let it through and it was new to the node's relay
//! cache.
//!
//! Column orders are fixed:
//!
//! - coverage: `message_index,message_id,origin,kind,reached,injected_step,last_reach_step`
//! - sweep: `attacker_count,seeds,mean_reached,stdev_reached`

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::{self, Read, Write};

use thiserror::Error;

use crate::types::{BlockId, MessageId, MessageKind, NodeId, TimeStep};

pub const COVERAGE_HEADER: [&str; 7] = [
    "message_index",
    "message_id",
    "origin",
    "kind",
    "reached",
    "injected_step",
    "last_reach_step",
];

pub const SWEEP_HEADER: [&str; 4] = ["attacker_count", "seeds", "mean_reached", "stdev_reached"];

pub const CHAIN_DUMP_HEADER: [&str; 3] = ["node_id", "tip_id", "height"];

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("unknown message id {0}")]
    UnknownMessage(MessageId),
    #[error("no transaction records originated by node {0}")]
    EmptySelection(NodeId),
    #[error("no data rows")]
    NoData,
    #[error("bad header: expected {expected:?}, got {got:?}")]
    Header {
        expected: Vec<String>,
        got: Vec<String>,
    },
    #[error("row {row}: {reason}")]
    Row { row: usize, reason: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoverageRecord {
    /// 1-based emission index among messages of the same kind.
    pub message_index: u32,
    pub message_id: MessageId,
    pub origin: NodeId,
    pub kind: MessageKind,
    pub reached: u32,
    pub injected_step: TimeStep,
    /// Equals `injected_step` when nothing was reached.
    pub last_reach_step: TimeStep,
}

/// Mean and spread of target coverage at one attacker count.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepPoint {
    pub attacker_count: u32,
    pub seeds_used: u32,
    pub mean_reached: f64,
    pub stdev_reached: f64,
}

impl SweepPoint {
    /// Aggregates per-seed mean coverages. Uses the sample standard deviation
    /// (zero for a single seed).
    pub fn from_samples(attacker_count: u32, samples: &[f64]) -> Option<Self> {
        if samples.is_empty() {
            return None;
        }
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let stdev = if samples.len() > 1 {
            (samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Some(SweepPoint {
            attacker_count,
            seeds_used: samples.len() as u32,
            mean_reached: mean,
            stdev_reached: stdev,
        })
    }

    pub fn standard_error(&self) -> f64 {
        self.stdev_reached / (self.seeds_used as f64).sqrt()
    }
}

/// Exact counters kept for every run regardless of event logging.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Counters {
    pub sent: u64,
    pub delivered: u64,
    pub dropped: u64,
    pub duplicates: u64,
    pub accepted: u64,
}

impl Counters {
    pub fn merge(&mut self, other: &Counters) {
        self.sent += other.sent;
        self.delivered += other.delivered;
        self.dropped += other.dropped;
        self.duplicates += other.duplicates;
        self.accepted += other.accepted;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MinedBlock {
    pub id: BlockId,
    pub miner: NodeId,
    pub height: u64,
    pub step: TimeStep,
}

/// Everything a finished run reports.
#[derive(Clone, Debug, Default)]
pub struct MetricsLog {
    pub nodes: u32,
    pub steps: u64,
    /// In injection order: by step, then origin, then message id.
    pub records: Vec<CoverageRecord>,
    /// In `(step, miner)` order.
    pub blocks: Vec<MinedBlock>,
    pub counters: Counters,
    /// Messages sent during the last step and never delivered.
    pub in_flight: u64,
    index: HashMap<MessageId, usize>,
}

impl MetricsLog {
    pub fn new(
        nodes: u32,
        steps: u64,
        records: Vec<CoverageRecord>,
        blocks: Vec<MinedBlock>,
        counters: Counters,
        in_flight: u64,
    ) -> Self {
        let index = records
            .iter()
            .enumerate()
            .map(|(i, r)| (r.message_id, i))
            .collect();
        MetricsLog {
            nodes,
            steps,
            records,
            blocks,
            counters,
            in_flight,
            index,
        }
    }

    pub fn transactions(&self) -> impl Iterator<Item = &CoverageRecord> {
        self.records
            .iter()
            .filter(|r| r.kind == MessageKind::Transaction)
    }

    /// Steps per mined block, or `None` when no block was found.
    pub fn mean_block_interval(&self) -> Option<f64> {
        (!self.blocks.is_empty()).then(|| self.steps as f64 / self.blocks.len() as f64)
    }
}

pub fn coverage(log: &MetricsLog, message_id: MessageId) -> Result<CoverageRecord, MetricsError> {
    log.index
        .get(&message_id)
        .map(|&i| log.records[i])
        .ok_or(MetricsError::UnknownMessage(message_id))
}

/// Mean reach of the transactions originated by `origin`.
pub fn average_coverage(records: &[CoverageRecord], origin: NodeId) -> Result<f64, MetricsError> {
    let (sum, count) = records
        .iter()
        .filter(|r| r.origin == origin && r.kind == MessageKind::Transaction)
        .fold((0u64, 0u64), |(s, c), r| (s + r.reached as u64, c + 1));
    if count == 0 {
        return Err(MetricsError::EmptySelection(origin));
    }
    Ok(sum as f64 / count as f64)
}

/// Output flavor for tabular files.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TableFormat {
    #[default]
    Csv,
    /// Whitespace separated, header as a `#` comment.
    Gnuplot,
}

fn write_table<W: Write>(
    mut out: W,
    format: TableFormat,
    header: &[&str],
    rows: impl Iterator<Item = Vec<String>>,
) -> Result<(), MetricsError> {
    match format {
        TableFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(header)?;
            for row in rows {
                w.write_record(&row)?;
            }
            w.flush()?;
        }
        TableFormat::Gnuplot => {
            writeln!(out, "# {}", header.join(" "))?;
            for row in rows {
                writeln!(out, "{}", row.join(" "))?;
            }
            out.flush()?;
        }
    }
    Ok(())
}

/// Plain decimal with six fractional digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.6}")
}

pub fn write_coverage_csv<W: Write>(
    out: W,
    records: &[CoverageRecord],
    format: TableFormat,
) -> Result<(), MetricsError> {
    let rows = records.iter().map(|r| {
        vec![
            r.message_index.to_string(),
            r.message_id.to_string(),
            r.origin.to_string(),
            r.kind.to_string(),
            r.reached.to_string(),
            r.injected_step.to_string(),
            r.last_reach_step.to_string(),
        ]
    });
    write_table(out, format, &COVERAGE_HEADER, rows)
}

pub fn write_sweep_csv<W: Write>(
    out: W,
    points: &[SweepPoint],
    format: TableFormat,
) -> Result<(), MetricsError> {
    let rows = points.iter().map(|p| {
        vec![
            p.attacker_count.to_string(),
            p.seeds_used.to_string(),
            fmt_f64(p.mean_reached),
            fmt_f64(p.stdev_reached),
        ]
    });
    write_table(out, format, &SWEEP_HEADER, rows)
}

/// One `node_id,tip_id,height` row per node.
pub fn write_chain_dump<W: Write>(
    out: W,
    tips: &[(NodeId, BlockId, u64)],
) -> Result<(), MetricsError> {
    let rows = tips
        .iter()
        .map(|(node, tip, height)| vec![node.to_string(), tip.0.to_string(), height.to_string()]);
    write_table(out, TableFormat::Csv, &CHAIN_DUMP_HEADER, rows)
}

fn read_rows<R: Read>(input: R, header: &[&str]) -> Result<Vec<csv::StringRecord>, MetricsError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(input);
    let got: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if got != header {
        return Err(MetricsError::Header {
            expected: header.iter().map(|s| s.to_string()).collect(),
            got,
        });
    }
    Ok(reader.records().collect::<Result<_, _>>()?)
}

fn field<T: std::str::FromStr>(
    rec: &csv::StringRecord,
    row: usize,
    col: usize,
) -> Result<T, MetricsError>
where
    T::Err: std::fmt::Display,
{
    let raw = rec.get(col).ok_or_else(|| MetricsError::Row {
        row,
        reason: format!("missing column {col}"),
    })?;
    raw.trim().parse().map_err(|e: T::Err| MetricsError::Row {
        row,
        reason: format!("column {col} ({raw:?}): {e}"),
    })
}

pub fn read_coverage_csv<R: Read>(input: R) -> Result<Vec<CoverageRecord>, MetricsError> {
    read_rows(input, &COVERAGE_HEADER)?
        .iter()
        .enumerate()
        .map(|(i, rec)| {
            let row = i + 2;
            Ok(CoverageRecord {
                message_index: field(rec, row, 0)?,
                message_id: MessageId(field(rec, row, 1)?),
                origin: NodeId(field(rec, row, 2)?),
                kind: field(rec, row, 3)?,
                reached: field(rec, row, 4)?,
                injected_step: TimeStep(field(rec, row, 5)?),
                last_reach_step: TimeStep(field(rec, row, 6)?),
            })
        })
        .collect()
}

pub fn read_sweep_csv<R: Read>(input: R) -> Result<Vec<SweepPoint>, MetricsError> {
    read_rows(input, &SWEEP_HEADER)?
        .iter()
        .enumerate()
        .map(|(i, rec)| {
            let row = i + 2;
            Ok(SweepPoint {
                attacker_count: field(rec, row, 0)?,
                seeds_used: field(rec, row, 1)?,
                mean_reached: field(rec, row, 2)?,
                stdev_reached: field(rec, row, 3)?,
            })
        })
        .collect()
}

/// Headline numbers of one run, rendered as `key=value` lines.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub nodes: u32,
    pub steps: u64,
    pub blocks_mined: usize,
    pub mean_block_interval: Option<f64>,
    pub max_tip_height: u64,
    pub target: NodeId,
    pub attackers: usize,
    pub sybil_complete: bool,
    pub target_transactions: usize,
    pub mean_coverage: Option<f64>,
    pub counters: Counters,
}

impl RunSummary {
    pub fn render(&self) -> String {
        let opt = |x: Option<f64>| x.map_or_else(|| "nan".to_string(), fmt_f64);
        let mut s = String::new();
        let c = &self.counters;
        let _ = writeln!(s, "nodes={}", self.nodes);
        let _ = writeln!(s, "steps={}", self.steps);
        let _ = writeln!(s, "blocks_mined={}", self.blocks_mined);
        let _ = writeln!(s, "mean_block_interval={}", opt(self.mean_block_interval));
        let _ = writeln!(s, "max_tip_height={}", self.max_tip_height);
        let _ = writeln!(s, "target={}", self.target);
        let _ = writeln!(s, "attackers={}", self.attackers);
        let _ = writeln!(s, "sybil_complete={}", u8::from(self.sybil_complete));
        let _ = writeln!(s, "target_transactions={}", self.target_transactions);
        let _ = writeln!(s, "mean_coverage={}", opt(self.mean_coverage));
        let _ = writeln!(s, "messages_sent={}", c.sent);
        let _ = writeln!(s, "messages_delivered={}", c.delivered);
        let _ = writeln!(s, "messages_dropped={}", c.dropped);
        let _ = writeln!(s, "messages_duplicate={}", c.duplicates);
        let _ = writeln!(s, "messages_accepted={}", c.accepted);
        s
    }
}

/// Parses `key=value` summary text into pairs, preserving order.
pub fn parse_summary(text: &str) -> Vec<(String, String)> {
    text.lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect()
}
