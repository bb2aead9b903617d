use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::stats::{histogram_edges, range, summarize_on, DistributionSummary};
use super::{accuracy_bin, check_topology};
use crate::error::{Error, Result};
use crate::metrics::MetricRecord;

pub const TRAJECTORY_REPORT_SCHEMA: &str = "cnt.trajectory_report/1";

/// One point of a fluctuation series. The spread is the min/max fluctuation
/// over all snapshots of the trajectory that fall in the same accuracy bin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorBar {
    pub snapshot: usize,
    pub accuracy: f64,
    pub value: f64,
    pub spread_lo: f64,
    pub spread_hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSeries {
    pub layer: usize,
    pub points: Vec<ErrorBar>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotPdf {
    pub layer: usize,
    pub snapshot: usize,
    pub summary: DistributionSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryReport {
    pub schema: String,
    pub seed: u64,
    pub task_tag: String,
    pub accuracies: Vec<f64>,
    pub epochs: Vec<u64>,
    /// Whether accuracy never decreases along the given order.
    pub accuracy_monotone: bool,
    pub fluctuation: Vec<LayerSeries>,
    pub strength_pdfs: Vec<SnapshotPdf>,
}

/// Builds the individual-analysis view of snapshots of one network, given
/// in training order.
pub fn trajectory_report(snapshots: &[MetricRecord], histogram_bins: usize) -> Result<TrajectoryReport> {
    if snapshots.len() < 2 {
        return Err(Error::Argument(format!(
            "a trajectory needs at least 2 snapshots, got {}",
            snapshots.len()
        )));
    }
    let first = &snapshots[0].snapshot_meta;
    for (i, r) in snapshots.iter().enumerate().skip(1) {
        let m = &r.snapshot_meta;
        if m.seed != first.seed
            || m.task_tag != first.task_tag
            || m.init_family != first.init_family
            || m.init_scale != first.init_scale
        {
            return Err(Error::Argument(format!(
                "snapshot {i} belongs to a different network (seed {} / {:?} vs seed {} / {:?})",
                m.seed, m.task_tag, first.seed, first.task_tag
            )));
        }
    }
    check_topology(snapshots)?;

    let accuracies: Vec<f64> = snapshots.iter().map(|r| r.snapshot_meta.accuracy).collect();
    let bins = accuracies.iter().map(|&a| accuracy_bin(a)).collect::<Result<Vec<_>>>()?;
    let layers = snapshots[0].fluctuations.len();

    let fluctuation = (0..layers)
        .map(|layer| {
            let ys: Vec<f64> = snapshots.iter().map(|r| r.fluctuations[layer].value).collect();
            let points = (0..snapshots.len())
                .map(|t| {
                    let peers = (0..ys.len()).filter(|&u| bins[u] == bins[t]).map(|u| ys[u]);
                    let (lo, hi) = peers.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), y| (a.min(y), b.max(y)));
                    ErrorBar {
                        snapshot: t,
                        accuracy: accuracies[t],
                        value: ys[t],
                        spread_lo: lo,
                        spread_hi: hi,
                    }
                })
                .collect();
            LayerSeries { layer, points }
        })
        .collect();

    let mut strength_pdfs = Vec::new();
    for layer in 0..layers {
        let union: Vec<f64> = snapshots
            .iter()
            .flat_map(|r| range(&r.strengths[layer].s))
            .flat_map(|(a, b)| [a, b])
            .collect();
        let (lo, hi) = range(&union).expect("layers are non-empty");
        let edges = histogram_edges(lo, hi, histogram_bins.max(1));
        for (t, r) in snapshots.iter().enumerate() {
            strength_pdfs.push(SnapshotPdf {
                layer,
                snapshot: t,
                summary: summarize_on(&r.strengths[layer].s, &edges)?,
            });
        }
    }

    Ok(TrajectoryReport {
        schema: TRAJECTORY_REPORT_SCHEMA.into(),
        seed: first.seed,
        task_tag: first.task_tag.clone(),
        accuracy_monotone: accuracies.windows(2).all(|w| w[0] <= w[1]),
        epochs: snapshots.iter().map(|r| r.snapshot_meta.epoch).collect(),
        accuracies,
        fluctuation,
        strength_pdfs,
    })
}

impl TrajectoryReport {
    pub fn to_json(&self) -> Vec<u8> {
        serde_json::to_vec_pretty(self).expect("report serialization is infallible")
    }

    /// `layer,snapshot,accuracy,Y,spread_lo,spread_hi`, one row per layer and snapshot.
    pub fn error_bar_csv(&self) -> String {
        let mut out = String::from("layer,snapshot,accuracy,Y,spread_lo,spread_hi\n");
        for series in &self.fluctuation {
            for p in &series.points {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    series.layer, p.snapshot, p.accuracy, p.value, p.spread_lo, p.spread_hi
                );
            }
        }
        out
    }

    /// Strength histograms: `layer,snapshot,accuracy,bin_lo,bin_hi,density`.
    pub fn strength_pdf_csv(&self) -> String {
        let mut out = String::from("layer,snapshot,accuracy,bin_lo,bin_hi,density\n");
        for pdf in &self.strength_pdfs {
            let h = &pdf.summary.histogram;
            for (i, d) in h.densities.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    pdf.layer,
                    pdf.snapshot,
                    self.accuracies[pdf.snapshot],
                    h.edges[i],
                    h.edges[i + 1],
                    d
                );
            }
        }
        out
    }
}
