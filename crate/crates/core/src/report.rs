//! Normalized plot data and the coverage cutoff of a sweep.

use std::fmt::Write as _;
use std::io::Write;

use thiserror::Error;

use crate::metrics::{fmt_f64, MetricsError, SweepPoint, TableFormat};

/// Coverage below this share of the network counts as cut off.
pub const CUTOFF_FRACTION: f64 = 0.05;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("no data rows")]
    NoData,
    #[error("nodes must be ≥ 2")]
    BadNodeCount,
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// One sweep point scaled to fractions: attackers over `nodes`, reach over
/// the `nodes − 1` possible receivers.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlotRow {
    pub attacker_count: u32,
    pub attacker_fraction: f64,
    pub coverage_fraction: f64,
    pub stdev_fraction: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub nodes: u32,
    pub rows: Vec<PlotRow>,
    /// Smallest attacker count whose mean coverage is below 5% of `nodes`.
    pub cutoff: Option<u32>,
}

/// Threshold scan over points sorted by attacker count.
pub fn cutoff(points: &[SweepPoint], nodes: u32) -> Option<u32> {
    let threshold = CUTOFF_FRACTION * nodes as f64;
    let mut sorted: Vec<&SweepPoint> = points.iter().collect();
    sorted.sort_by_key(|p| p.attacker_count);
    sorted
        .into_iter()
        .find(|p| p.mean_reached < threshold)
        .map(|p| p.attacker_count)
}

pub fn build_report(points: &[SweepPoint], nodes: u32) -> Result<Report, ReportError> {
    if points.is_empty() {
        return Err(ReportError::NoData);
    }
    if nodes < 2 {
        return Err(ReportError::BadNodeCount);
    }
    let receivers = (nodes - 1) as f64;
    let mut rows: Vec<PlotRow> = points
        .iter()
        .map(|p| PlotRow {
            attacker_count: p.attacker_count,
            attacker_fraction: p.attacker_count as f64 / nodes as f64,
            coverage_fraction: p.mean_reached / receivers,
            stdev_fraction: p.stdev_reached / receivers,
        })
        .collect();
    rows.sort_by_key(|r| r.attacker_count);
    Ok(Report {
        nodes,
        rows,
        cutoff: cutoff(points, nodes),
    })
}

impl Report {
    pub fn write_plot_data<W: Write>(
        &self,
        mut out: W,
        format: TableFormat,
    ) -> std::io::Result<()> {
        let header = [
            "attacker_count",
            "attacker_fraction",
            "coverage_fraction",
            "stdev_fraction",
        ];
        let sep = match format {
            TableFormat::Csv => ",",
            TableFormat::Gnuplot => " ",
        };
        match format {
            TableFormat::Csv => writeln!(out, "{}", header.join(sep))?,
            TableFormat::Gnuplot => writeln!(out, "# {}", header.join(sep))?,
        }
        for r in &self.rows {
            writeln!(
                out,
                "{}{sep}{}{sep}{}{sep}{}",
                r.attacker_count,
                fmt_f64(r.attacker_fraction),
                fmt_f64(r.coverage_fraction),
                fmt_f64(r.stdev_fraction)
            )?;
        }
        out.flush()
    }

    pub fn render_summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "nodes={}", self.nodes);
        let _ = writeln!(s, "points={}", self.rows.len());
        let _ = writeln!(
            s,
            "threshold={}",
            fmt_f64(CUTOFF_FRACTION * self.nodes as f64)
        );
        match self.cutoff {
            Some(c) => {
                let _ = writeln!(s, "cutoff_attackers={c}");
                let _ = writeln!(
                    s,
                    "cutoff_fraction={}",
                    fmt_f64(c as f64 / self.nodes as f64)
                );
            }
            None => {
                let _ = writeln!(s, "cutoff_attackers=none");
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(a: u32, mean: f64) -> SweepPoint {
        SweepPoint {
            attacker_count: a,
            seeds_used: 10,
            mean_reached: mean,
            stdev_reached: 0.0,
        }
    }

    #[test]
    fn cutoff_with_all_malicious_point() {
        let points = [pt(0, 9999.0), pt(9999, 0.0)];
        assert!(cutoff(&points, 10_000).unwrap() <= 9999);
    }

    /// Synthetic monotone sweep; a linear scan finds the first point under
    /// 500 (5% of 10 000) at 7500.
    #[test]
    fn synthetic_crossing() {
        let points: Vec<_> = (0..=40)
            .map(|i| {
                let a = i * 250;
                let mean = if a < 7500 {
                    9999.0 - a as f64 * 1.2
                } else {
                    400.0 - (a - 7500) as f64 * 0.1
                };
                pt(a, mean.max(0.0))
            })
            .collect();
        let oracle = points
            .iter()
            .find(|p| p.mean_reached < 500.0)
            .unwrap()
            .attacker_count;
        assert_eq!(oracle, 7500);
        assert_eq!(cutoff(&points, 10_000), Some(7500));
        let mut reversed = points.clone();
        reversed.reverse();
        assert_eq!(cutoff(&reversed, 10_000), Some(7500));
    }

    #[test]
    fn empty_sweep_rejected() {
        let err = build_report(&[], 100).unwrap_err();
        assert_eq!(err.to_string(), "no data rows");
    }

    #[test]
    fn normalization() {
        let r = build_report(&[pt(50, 99.0), pt(0, 99.0)], 100).unwrap();
        assert_eq!(r.rows[0].attacker_count, 0);
        assert_eq!(r.rows[1].attacker_fraction, 0.5);
        assert_eq!(r.rows[1].coverage_fraction, 1.0);
        assert_eq!(r.cutoff, None);
        let mut buf = Vec::new();
        r.write_plot_data(&mut buf, TableFormat::Csv).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().nth(2), Some("50,0.500000,1.000000,0.000000"));
        assert!(r.render_summary().contains("cutoff_attackers=none"));
    }
}
