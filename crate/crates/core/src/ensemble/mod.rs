//! Population-level analysis.
//!
//! *Ensemble* analysis groups [`MetricRecord`]s of many independently
//! trained networks into ten accuracy bins of width 0.1 and summarizes the
//! pooled metric distributions of every layer in every bin. *Individual*
//! analysis ([`trajectory_report`]) follows one network across snapshots.
//!
//! Pooling: strengths (and link weights) of all networks in a bin are
//! concatenated into one sample; fluctuation contributes one value per
//! network. [`per_network_summaries`] gives the unpooled alternative.

mod report;
mod stats;
mod trajectory;

pub use report::{ensemble_report, BootstrapRound, EnsembleReport, ReportOptions, SummaryEntry, TrendEntry, ENSEMBLE_REPORT_SCHEMA};
pub use stats::{
    histogram_edges, histogram_on, kde, moments, range, summarize, summarize_on, DistributionSummary, Histogram,
    DEFAULT_HISTOGRAM_BINS, MOMENT_VARIANCE_FLOOR,
};
pub use trajectory::{trajectory_report, ErrorBar, LayerSeries, SnapshotPdf, TrajectoryReport, TRAJECTORY_REPORT_SCHEMA};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::MetricRecord;

pub const BIN_COUNT: usize = 10;
/// Minimum networks per bin before a bin is flagged as under-populated.
pub const DEFAULT_MIN_POPULATION: usize = 50;

/// Edges `0.0, 0.1, ..., 1.0`.
pub fn accuracy_edges() -> [f64; BIN_COUNT + 1] {
    std::array::from_fn(|i| i as f64 / BIN_COUNT as f64)
}

/// Bin of an accuracy in `[0, 1]`: `[0.1 k, 0.1 (k+1))`, with 1.0 in bin 9.
pub fn accuracy_bin(accuracy: f64) -> Result<usize> {
    if !(0.0..=1.0).contains(&accuracy) {
        return Err(Error::Validation(format!("accuracy {accuracy} outside [0, 1]")));
    }
    let edges = accuracy_edges();
    let k = edges.iter().rposition(|&e| accuracy >= e).unwrap_or(0);
    Ok(k.min(BIN_COUNT - 1))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyBins {
    pub edges: [f64; BIN_COUNT + 1],
    pub bins: Vec<Vec<MetricRecord>>,
    pub min_population: usize,
}

impl AccuracyBins {
    pub fn counts(&self) -> Vec<usize> {
        self.bins.iter().map(Vec::len).collect()
    }

    /// Occupied bins holding fewer than `min_population` records.
    pub fn underpopulated(&self) -> Vec<usize> {
        self.bins
            .iter()
            .enumerate()
            .filter(|(_, b)| !b.is_empty() && b.len() < self.min_population)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn occupied(&self) -> Vec<usize> {
        (0..BIN_COUNT).filter(|&i| !self.bins[i].is_empty()).collect()
    }

    pub fn total(&self) -> usize {
        self.bins.iter().map(Vec::len).sum()
    }
}

/// Assigns every record to exactly one accuracy bin. Within a bin, records
/// keep their input order.
pub fn bin_by_accuracy(records: Vec<MetricRecord>, min_population: usize) -> Result<AccuracyBins> {
    let mut bins = vec![Vec::new(); BIN_COUNT];
    for r in records {
        let k = accuracy_bin(r.snapshot_meta.accuracy)?;
        bins[k].push(r);
    }
    Ok(AccuracyBins {
        edges: accuracy_edges(),
        bins,
        min_population,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Raw weights of a parameter block (layer = block index).
    LinkWeights,
    /// Total node strength `s` (layer = neuron layer index).
    Strength,
    /// Layer fluctuation, one value per network (layer = neuron layer index).
    Fluctuation,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::LinkWeights, Metric::Strength, Metric::Fluctuation];

    pub fn name(self) -> &'static str {
        match self {
            Metric::LinkWeights => "link_weights",
            Metric::Strength => "strength",
            Metric::Fluctuation => "fluctuation",
        }
    }

    /// Number of layers this metric is indexed over for a given topology.
    pub fn layer_count(self, topology: &[usize]) -> usize {
        match self {
            Metric::LinkWeights => topology.len().saturating_sub(1),
            Metric::Strength | Metric::Fluctuation => topology.len(),
        }
    }
}

/// Checks that every record shares the topology of the first.
pub fn check_topology(records: &[MetricRecord]) -> Result<()> {
    let Some(first) = records.first() else {
        return Ok(());
    };
    let topo = first.topology();
    for (i, r) in records.iter().enumerate().skip(1) {
        let other = r.topology();
        if other != topo {
            return Err(Error::TopologyMismatch {
                first: 0,
                second: i,
                detail: format!("neuron layers {topo:?} vs {other:?}"),
            });
        }
    }
    Ok(())
}

/// Pools one metric of one layer across the records of a bin.
///
/// An empty bin yields an empty sample when `allow_empty` is set and an
/// argument error otherwise.
pub fn pool_layer_metric(bin: &[MetricRecord], layer: usize, metric: Metric, allow_empty: bool) -> Result<Vec<f64>> {
    if bin.is_empty() {
        return if allow_empty {
            Ok(Vec::new())
        } else {
            Err(Error::Argument("cannot pool an empty bin".into()))
        };
    }
    check_topology(bin)?;
    let layers = metric.layer_count(&bin[0].topology());
    if layer >= layers {
        return Err(Error::Argument(format!(
            "layer {layer} out of range for {} ({layers} layers)",
            metric.name()
        )));
    }
    let mut out = Vec::new();
    for r in bin {
        match metric {
            Metric::LinkWeights => {
                let weights = r.link_weights.as_ref().ok_or_else(|| {
                    Error::Argument("record carries no link weights; analyze with keep_link_weights".into())
                })?;
                out.extend_from_slice(&weights[layer]);
            }
            Metric::Strength => out.extend_from_slice(&r.strengths[layer].s),
            Metric::Fluctuation => out.push(r.fluctuations[layer].value),
        }
    }
    Ok(out)
}

/// One strength summary per network of a bin, for comparison with the
/// pooled view. Histograms share edges across the bin.
pub fn per_network_summaries(bin: &[MetricRecord], layer: usize, bins: usize) -> Result<Vec<DistributionSummary>> {
    let pooled = pool_layer_metric(bin, layer, Metric::Strength, false)?;
    let (lo, hi) = range(&pooled).expect("non-empty pool");
    let edges = histogram_edges(lo, hi, bins);
    bin.iter()
        .map(|r| summarize_on(&r.strengths[layer].s, &edges))
        .collect()
}
