//! Brute-force reference: materializes the bipartite graph of a parameter
//! block as an explicit edge list and recomputes the metrics by direct
//! summation. Deliberately naive; used to check the fast paths and to
//! export graphs for external tools.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{self, AnalyzeOptions};
use crate::snapshot::{LayerWeights, NetworkSnapshot, NeuronId, Side};

pub const DEFAULT_EDGE_CAP: u64 = 10_000_000;

/// Tolerance for dense blocks when comparing fast and oracle metrics.
pub const DENSE_TOLERANCE: f64 = 1e-12;
/// Tolerance for conv blocks.
pub const CONV_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub from: NeuronId,
    pub to: NeuronId,
    pub weight: f64,
}

/// Edges of one parameter block. Every edge goes from neuron layer
/// `layer_index` to `layer_index + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeList {
    pub layer_index: usize,
    pub from_neurons: usize,
    pub to_neurons: usize,
    pub edges: Vec<Edge>,
}

/// Number of edges `unroll_layer` would produce.
pub fn edge_count(layer: &LayerWeights) -> u64 {
    match layer {
        LayerWeights::Dense(d) => (d.inputs() * d.outputs()) as u64,
        LayerWeights::Conv2d(c) => {
            let (rows, cols) = c.axes();
            let [_, _, ci, co] = c.kernel().shape();
            let per_pair: u64 = (0..rows.output)
                .map(|y| rows.valid_offsets(y).len() as u64)
                .sum::<u64>()
                * (0..cols.output).map(|x| cols.valid_offsets(x).len() as u64).sum::<u64>();
            per_pair * (ci * co) as u64
        }
    }
}

/// Expands block `layer_index` into its explicit edge list.
pub fn unroll_layer(layer: &LayerWeights, layer_index: usize, cap: u64) -> Result<EdgeList> {
    let count = edge_count(layer);
    if count > cap {
        return Err(Error::SizeCap { count, cap });
    }
    let node = |layer_index, flat_index| NeuronId {
        layer_index,
        flat_index,
    };
    let mut edges = Vec::with_capacity(count as usize);
    match layer {
        LayerWeights::Dense(d) => {
            let w = d.weights();
            for i in 0..w.rows() {
                for j in 0..w.cols() {
                    edges.push(Edge {
                        from: node(layer_index, i),
                        to: node(layer_index + 1, j),
                        weight: w.get(i, j),
                    });
                }
            }
        }
        LayerWeights::Conv2d(c) => {
            let (rows, cols) = c.axes();
            let [kh, kw, ci, co] = c.kernel().shape();
            let ind = c.input_dims();
            let outd = c.output_dims();
            for o in 0..co {
                for y in 0..outd.height {
                    for x in 0..outd.width {
                        let to = (o * outd.height + y) * outd.width + x;
                        for a in 0..kh {
                            let Some(r) = rows.input_index(y, a) else { continue };
                            for b in 0..kw {
                                let Some(col) = cols.input_index(x, b) else { continue };
                                for i in 0..ci {
                                    edges.push(Edge {
                                        from: node(layer_index, (i * ind.height + r) * ind.width + col),
                                        to: node(layer_index + 1, to),
                                        weight: c.kernel().get(a, b, i, o),
                                    });
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(EdgeList {
        layer_index,
        from_neurons: layer.neuron_count(Side::Input),
        to_neurons: layer.neuron_count(Side::Output),
        edges,
    })
}

/// Metrics recomputed from an edge list by plain summation.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleMetrics {
    pub mu: f64,
    pub delta: f64,
    /// Out-strength of every source neuron.
    pub s_out: Vec<f64>,
    /// In-strength of every target neuron.
    pub s_in: Vec<f64>,
    /// Fluctuation of `s_out` over the source layer.
    pub y_out: f64,
    /// Fluctuation of `s_in` over the target layer.
    pub y_in: f64,
}

fn naive_std(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mut total = 0.0;
    for x in v {
        total += x;
    }
    let mean = total / n;
    let mut acc = 0.0;
    for x in v {
        acc += (x - mean) * (x - mean);
    }
    (acc / n).sqrt()
}

pub fn oracle_metrics(list: &EdgeList) -> Result<OracleMetrics> {
    if list.edges.is_empty() {
        return Err(Error::Argument("oracle metrics of an empty edge list".into()));
    }
    let n = list.edges.len() as f64;
    let mut total = 0.0;
    for e in &list.edges {
        total += e.weight;
    }
    let mu = total / n;
    let mut sq = 0.0;
    for e in &list.edges {
        sq += (e.weight - mu) * (e.weight - mu);
    }
    let mut s_out = vec![0.0; list.from_neurons];
    let mut s_in = vec![0.0; list.to_neurons];
    for e in &list.edges {
        s_out[e.from.flat_index] += e.weight;
        s_in[e.to.flat_index] += e.weight;
    }
    Ok(OracleMetrics {
        mu,
        delta: sq / n,
        y_out: naive_std(&s_out),
        y_in: naive_std(&s_in),
        s_out,
        s_in,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExportFormat {
    Csv,
    GraphExchange,
}

pub fn export_edge_list(list: &EdgeList, format: ExportFormat) -> Vec<u8> {
    match format {
        ExportFormat::Csv => edge_list_csv(list).into_bytes(),
        ExportFormat::GraphExchange => edge_list_graphml(list).into_bytes(),
    }
}

fn edge_list_csv(list: &EdgeList) -> String {
    let mut out = String::from("from_layer,from_index,to_index,weight\n");
    for e in &list.edges {
        let _ = writeln!(out, "{},{},{},{}", e.from.layer_index, e.from.flat_index, e.to.flat_index, e.weight);
    }
    out
}

fn edge_list_graphml(list: &EdgeList) -> String {
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    out.push_str("<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\">\n");
    out.push_str("  <key id=\"weight\" for=\"edge\" attr.name=\"weight\" attr.type=\"double\"/>\n");
    out.push_str("  <key id=\"layer\" for=\"node\" attr.name=\"layer\" attr.type=\"int\"/>\n");
    let _ = writeln!(out, "  <graph id=\"block{}\" edgedefault=\"directed\">", list.layer_index);
    for (layer, count) in [(list.layer_index, list.from_neurons), (list.layer_index + 1, list.to_neurons)] {
        for i in 0..count {
            let _ = writeln!(out, "    <node id=\"n{layer}_{i}\"><data key=\"layer\">{layer}</data></node>");
        }
    }
    for e in &list.edges {
        let _ = writeln!(
            out,
            "    <edge source=\"n{}_{}\" target=\"n{}_{}\"><data key=\"weight\">{}</data></edge>",
            e.from.layer_index, e.from.flat_index, e.to.layer_index, e.to.flat_index, e.weight
        );
    }
    out.push_str("  </graph>\n</graphml>\n");
    out
}

/// Parses the CSV edge-list export. Neuron counts are inferred from the
/// largest indices present.
pub fn read_edge_list_csv(bytes: &[u8]) -> Result<EdgeList> {
    let mut reader = csv::Reader::from_reader(bytes);
    let mut edges = Vec::new();
    for row in reader.deserialize::<(usize, usize, usize, f64)>() {
        let (layer, from, to, weight) = row?;
        edges.push(Edge {
            from: NeuronId {
                layer_index: layer,
                flat_index: from,
            },
            to: NeuronId {
                layer_index: layer + 1,
                flat_index: to,
            },
            weight,
        });
    }
    let layer_index = edges.first().map_or(0, |e| e.from.layer_index);
    if edges.iter().any(|e| e.from.layer_index != layer_index) {
        return Err(Error::Format("edge list mixes several blocks".into()));
    }
    Ok(EdgeList {
        layer_index,
        from_neurons: edges.iter().map(|e| e.from.flat_index + 1).max().unwrap_or(0),
        to_neurons: edges.iter().map(|e| e.to.flat_index + 1).max().unwrap_or(0),
        edges,
    })
}

/// Deviation between fast-path and oracle metrics for one block.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlockDeviation {
    pub layer_index: usize,
    pub kind: String,
    pub edges: u64,
    pub mu: f64,
    pub delta: f64,
    pub s_out: f64,
    pub s_in: f64,
    pub tolerance: f64,
}

impl BlockDeviation {
    pub fn max(&self) -> f64 {
        self.mu.max(self.delta).max(self.s_out).max(self.s_in)
    }

    pub fn passes(&self) -> bool {
        self.max() <= self.tolerance
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerificationReport {
    pub blocks: Vec<BlockDeviation>,
    /// Largest deviation of per-layer fluctuation over the whole network.
    pub fluctuation: f64,
}

impl VerificationReport {
    pub fn max_deviation(&self) -> f64 {
        self.blocks.iter().map(BlockDeviation::max).fold(self.fluctuation, f64::max)
    }

    pub fn passes(&self) -> bool {
        let tol = self.blocks.iter().map(|b| b.tolerance).fold(0.0, f64::max);
        self.blocks.iter().all(BlockDeviation::passes) && self.fluctuation <= tol
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Unrolls every block of `s` and compares against [`metrics::analyze_snapshot`].
pub fn verify_snapshot(s: &NetworkSnapshot, cap: u64) -> Result<VerificationReport> {
    let total: u64 = s.layers().iter().map(edge_count).sum();
    if total > cap {
        return Err(Error::SizeCap { count: total, cap });
    }
    let record = metrics::analyze_snapshot(s, &AnalyzeOptions::default())?;
    let sizes = s.neuron_layer_sizes();
    let mut s_in_full: Vec<Vec<f64>> = sizes.iter().map(|&n| vec![0.0; n]).collect();
    let mut s_out_full = s_in_full.clone();
    let mut blocks = Vec::new();
    for (b, layer) in s.layers().iter().enumerate() {
        let list = unroll_layer(layer, b, cap)?;
        let o = oracle_metrics(&list)?;
        let fast_out = metrics::block_out_strengths(layer);
        let fast_in = metrics::block_in_strengths(layer);
        let st = &record.link_stats[b];
        blocks.push(BlockDeviation {
            layer_index: b,
            kind: layer.kind().into(),
            edges: list.edges.len() as u64,
            mu: (st.mu - o.mu).abs(),
            delta: (st.delta - o.delta).abs(),
            s_out: max_abs_diff(&fast_out, &o.s_out),
            s_in: max_abs_diff(&fast_in, &o.s_in),
            tolerance: match layer {
                LayerWeights::Dense(_) => DENSE_TOLERANCE,
                LayerWeights::Conv2d(_) => CONV_TOLERANCE,
            },
        });
        s_out_full[b] = o.s_out;
        s_in_full[b + 1] = o.s_in;
    }
    let fluctuation = record
        .fluctuations
        .iter()
        .map(|f| {
            let n = f.layer_index;
            let total: Vec<f64> = s_in_full[n].iter().zip(&s_out_full[n]).map(|(a, b)| a + b).collect();
            (f.value - naive_std(&total)).abs()
        })
        .fold(0.0, f64::max);
    Ok(VerificationReport { blocks, fluctuation })
}
