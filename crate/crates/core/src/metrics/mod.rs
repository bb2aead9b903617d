//! Complex-network metrics over a [`NetworkSnapshot`].
//!
//! Four families are computed:
//!
//! - link-weight mean `mu` and population variance `delta` per parameter block;
//! - node strength `s = s_in + s_out` per neuron;
//! - layer fluctuation `Y`, the population standard deviation of `s` in a layer;
//! - node disparity `Σ (w / s)²` per neuron (opt-in, see [`AnalyzeOptions`]).
//!
//! Link statistics are indexed by parameter block; the other families by
//! neuron layer (input layer = 0). Biases never enter any metric.

mod fluctuation;
mod link;
mod strength;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

pub use fluctuation::{fluctuation_of, layer_fluctuation, node_disparity, DEFAULT_DISPARITY_EPSILON};
pub use link::{link_weight_stats, link_weight_stats_with, LayerLinkStats, LinkStatsMode};
pub(crate) use strength::conv_reduce;
pub use strength::{
    block_in_strengths, block_out_strengths, dense_in_strengths, dense_out_strengths, node_strength_conv,
    node_strength_dense, strengths_for_snapshot, ConvRole, StrengthVector,
};

use crate::error::Result;
use crate::snapshot::{LayerWeights, NetworkSnapshot, SnapshotMeta};

pub const METRIC_RECORD_SCHEMA: &str = "cnt.metric_record/1";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyzeOptions {
    pub disparity: bool,
    pub disparity_epsilon: f64,
    pub link_mode: LinkStatsMode,
    /// Copy the raw stored weights of every block into the record so that
    /// ensembles can pool link-weight distributions.
    pub keep_link_weights: bool,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        Self {
            disparity: false,
            disparity_epsilon: DEFAULT_DISPARITY_EPSILON,
            link_mode: LinkStatsMode::Realized,
            keep_link_weights: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerFluctuation {
    pub layer_index: usize,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    In,
    Out,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct NodeDisparity {
    pub value: Option<f64>,
    pub valid: bool,
}

impl From<Option<f64>> for NodeDisparity {
    fn from(value: Option<f64>) -> Self {
        Self {
            value,
            valid: value.is_some(),
        }
    }
}

/// Disparity of every neuron in one layer, taken over incoming links
/// (`In`) or, for the network input layer, over outgoing links (`Out`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerDisparity {
    pub layer_index: usize,
    pub direction: Direction,
    pub values: Vec<NodeDisparity>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub schema: String,
    pub snapshot_meta: SnapshotMeta,
    pub link_stats: Vec<LayerLinkStats>,
    pub strengths: Vec<StrengthVector>,
    pub fluctuations: Vec<LayerFluctuation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disparities: Option<Vec<LayerDisparity>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub link_weights: Option<Vec<Vec<f64>>>,
}

impl MetricRecord {
    /// Neuron count of every neuron layer.
    pub fn topology(&self) -> Vec<usize> {
        self.strengths.iter().map(StrengthVector::len).collect()
    }

    pub fn to_json(&self) -> Vec<u8> {
        serde_json::to_vec_pretty(self).expect("record serialization is infallible")
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        Ok(serde_json::from_slice(bytes)?)
    }

    /// One row per neuron: `layer,neuron,s_in,s_out,s`.
    pub fn strengths_csv(&self) -> String {
        let mut out = String::from("layer,neuron,s_in,s_out,s\n");
        for sv in &self.strengths {
            for k in 0..sv.len() {
                let _ = writeln!(out, "{},{},{},{},{}", sv.layer_index, k, sv.s_in[k], sv.s_out[k], sv.s[k]);
            }
        }
        out
    }

    /// One row per parameter block: `layer,mu,delta,links`.
    pub fn link_stats_csv(&self) -> String {
        let mut out = String::from("layer,mu,delta,links\n");
        for l in &self.link_stats {
            let _ = writeln!(out, "{},{},{},{}", l.layer_index, l.mu, l.delta, l.links);
        }
        out
    }

    /// One row per neuron layer: `layer,fluctuation`.
    pub fn fluctuations_csv(&self) -> String {
        let mut out = String::from("layer,fluctuation\n");
        for f in &self.fluctuations {
            let _ = writeln!(out, "{},{}", f.layer_index, f.value);
        }
        out
    }
}

/// Computes every metric family for one snapshot. Deterministic.
pub fn analyze_snapshot(s: &NetworkSnapshot, opts: &AnalyzeOptions) -> Result<MetricRecord> {
    let link_stats = s
        .layers()
        .iter()
        .enumerate()
        .map(|(i, l)| LayerLinkStats {
            layer_index: i,
            ..link_weight_stats_with(l, opts.link_mode)
        })
        .collect();
    let strengths = strengths_for_snapshot(s);
    let fluctuations = strengths
        .iter()
        .map(|sv| {
            Ok(LayerFluctuation {
                layer_index: sv.layer_index,
                value: layer_fluctuation(sv)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let disparities = opts.disparity.then(|| disparities_for_snapshot(s, opts.disparity_epsilon));
    let link_weights = opts
        .keep_link_weights
        .then(|| s.layers().iter().map(|l| l.weight_values().to_vec()).collect());
    Ok(MetricRecord {
        schema: METRIC_RECORD_SCHEMA.into(),
        snapshot_meta: s.meta().clone(),
        link_stats,
        strengths,
        fluctuations,
        disparities,
        link_weights,
    })
}

fn disparity_of(ws: &mut dyn Iterator<Item = f64>, eps: f64) -> NodeDisparity {
    let ws: Vec<f64> = ws.collect();
    // a neuron with no links (e.g. skipped by a large stride) has no disparity
    node_disparity(&ws, eps).ok().flatten().into()
}

/// Per-neuron disparity for every neuron layer. Layer 0 uses outgoing links,
/// all later layers incoming links.
pub fn disparities_for_snapshot(s: &NetworkSnapshot, eps: f64) -> Vec<LayerDisparity> {
    let layers = s.layers();
    let mut out = Vec::with_capacity(layers.len() + 1);
    let first = match &layers[0] {
        LayerWeights::Dense(d) => (0..d.inputs())
            .map(|i| disparity_of(&mut d.weights().row(i).iter().copied(), eps))
            .collect(),
        LayerWeights::Conv2d(c) => conv_reduce(c, ConvRole::AsInputLayer, |ws| disparity_of(ws, eps)),
    };
    out.push(LayerDisparity {
        layer_index: 0,
        direction: Direction::Out,
        values: first,
    });
    for (b, layer) in layers.iter().enumerate() {
        let values = match layer {
            LayerWeights::Dense(d) => {
                let w = d.weights();
                (0..w.cols())
                    .map(|j| disparity_of(&mut (0..w.rows()).map(|i| w.get(i, j)), eps))
                    .collect()
            }
            LayerWeights::Conv2d(c) => conv_reduce(c, ConvRole::AsOutputLayer, |ws| disparity_of(ws, eps)),
        };
        out.push(LayerDisparity {
            layer_index: b + 1,
            direction: Direction::In,
            values,
        });
    }
    out
}
