//! Node strength: sum of incoming (`s_in`) and outgoing (`s_out`) link
//! weights of every neuron.
//!
//! Dense blocks are plain row/column sums. Conv blocks avoid the unrolled
//! graph entirely: along each spatial axis, positions are grouped into
//! classes that see the same set of in-bounds kernel offsets. Interior
//! positions collapse into one class (or `stride` classes on the input
//! side), so the work is proportional to the number of boundary classes
//! times the kernel volume, plus one write per neuron to broadcast.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric;
use crate::snapshot::{AxisGeometry, Conv2d, Dense, LayerWeights, MapDims, NetworkSnapshot};

/// Strengths for every neuron of one neuron layer. `s[k] = s_in[k] + s_out[k]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrengthVector {
    pub layer_index: usize,
    pub s_in: Vec<f64>,
    pub s_out: Vec<f64>,
    pub s: Vec<f64>,
}

impl StrengthVector {
    pub fn new(layer_index: usize, s_in: Vec<f64>, s_out: Vec<f64>) -> Self {
        assert_eq!(s_in.len(), s_out.len(), "strength components differ in length");
        let s = s_in.iter().zip(&s_out).map(|(a, b)| a + b).collect();
        Self {
            layer_index,
            s_in,
            s_out,
            s,
        }
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }
}

/// Which side of a conv block the requested neurons sit on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvRole {
    /// Neurons of the block's input map; yields their `s_out`.
    AsInputLayer,
    /// Neurons of the block's output map; yields their `s_in`.
    AsOutputLayer,
}

/// `(s_in, s_out, s)` of neuron `k` sitting between two dense blocks.
pub fn node_strength_dense(prev: &Dense, next: &Dense, k: usize) -> Result<(f64, f64, f64)> {
    if prev.outputs() != next.inputs() {
        return Err(Error::Argument(format!(
            "blocks do not share a neuron layer: {} outputs vs {} inputs",
            prev.outputs(),
            next.inputs()
        )));
    }
    if k >= prev.outputs() {
        return Err(Error::Argument(format!(
            "neuron index {k} out of range for layer of {}",
            prev.outputs()
        )));
    }
    let w = prev.weights();
    let s_in = numeric::sum((0..w.rows()).map(|i| w.get(i, k)));
    let s_out = numeric::sum(next.weights().row(k).iter().copied());
    Ok((s_in, s_out, s_in + s_out))
}

/// Column sums: in-strength of every output neuron of a dense block.
pub fn dense_in_strengths(d: &Dense) -> Vec<f64> {
    let w = d.weights();
    (0..w.cols())
        .map(|j| numeric::sum((0..w.rows()).map(|i| w.get(i, j))))
        .collect()
}

/// Row sums: out-strength of every input neuron of a dense block.
pub fn dense_out_strengths(d: &Dense) -> Vec<f64> {
    let w = d.weights();
    (0..w.rows()).map(|i| numeric::sum(w.row(i).iter().copied())).collect()
}

/// Strength of every neuron on one side of a conv block, via weight sharing.
pub fn node_strength_conv(conv: &Conv2d, role: ConvRole) -> Vec<f64> {
    conv_reduce(conv, role, |ws| numeric::sum(ws))
}

/// Positions along one axis that share the same set of in-bounds offsets.
#[derive(Debug, Clone)]
pub(crate) struct AxisClass {
    pub offsets: Vec<usize>,
    pub positions: Vec<usize>,
}

fn group(keys: impl Iterator<Item = (usize, Vec<usize>)>) -> Vec<AxisClass> {
    let mut map: BTreeMap<Vec<usize>, Vec<usize>> = BTreeMap::new();
    for (pos, offsets) in keys {
        map.entry(offsets).or_default().push(pos);
    }
    map.into_iter()
        .map(|(offsets, positions)| AxisClass { offsets, positions })
        .collect()
}

/// Classes of output positions keyed by their in-bounds offset range.
pub(crate) fn output_classes(g: &AxisGeometry) -> Vec<AxisClass> {
    group((0..g.output).map(|o| (o, g.valid_offsets(o).collect())))
}

/// Classes of input positions keyed by the offsets through which they reach
/// some output position.
pub(crate) fn input_classes(g: &AxisGeometry) -> Vec<AxisClass> {
    group((0..g.input).map(|i| {
        let offsets = (0..g.kernel).filter(|&k| g.output_index(i, k).is_some()).collect();
        (i, offsets)
    }))
}

/// Applies `reduce` to the incident weights of one representative neuron
/// per (row class, column class, channel) and broadcasts the result.
pub(crate) fn conv_reduce<T, F>(conv: &Conv2d, role: ConvRole, mut reduce: F) -> Vec<T>
where
    T: Clone + Default,
    F: FnMut(&mut dyn Iterator<Item = f64>) -> T,
{
    let (rows, cols) = conv.axes();
    let kernel = conv.kernel();
    let [_, _, ci, co] = kernel.shape();
    let (dims, row_classes, col_classes, channels, across): (MapDims, _, _, usize, usize) = match role {
        ConvRole::AsOutputLayer => (conv.output_dims(), output_classes(rows), output_classes(cols), co, ci),
        ConvRole::AsInputLayer => (conv.input_dims(), input_classes(rows), input_classes(cols), ci, co),
    };
    let mut out = vec![T::default(); dims.len()];
    for rc in &row_classes {
        for cc in &col_classes {
            for ch in 0..channels {
                let mut weights = rc.offsets.iter().flat_map(|&a| {
                    cc.offsets.iter().flat_map(move |&b| {
                        (0..across).map(move |x| match role {
                            ConvRole::AsOutputLayer => kernel.get(a, b, x, ch),
                            ConvRole::AsInputLayer => kernel.get(a, b, ch, x),
                        })
                    })
                });
                let value = reduce(&mut weights);
                let plane = ch * dims.height * dims.width;
                for &r in &rc.positions {
                    let row = plane + r * dims.width;
                    for &c in &cc.positions {
                        out[row + c] = value.clone();
                    }
                }
            }
        }
    }
    out
}

/// In-strengths of a block's output neurons.
pub fn block_in_strengths(layer: &LayerWeights) -> Vec<f64> {
    match layer {
        LayerWeights::Dense(d) => dense_in_strengths(d),
        LayerWeights::Conv2d(c) => node_strength_conv(c, ConvRole::AsOutputLayer),
    }
}

/// Out-strengths of a block's input neurons.
pub fn block_out_strengths(layer: &LayerWeights) -> Vec<f64> {
    match layer {
        LayerWeights::Dense(d) => dense_out_strengths(d),
        LayerWeights::Conv2d(c) => node_strength_conv(c, ConvRole::AsInputLayer),
    }
}

/// One [`StrengthVector`] per neuron layer, input layer first. Input
/// neurons have `s_in = 0`, output neurons `s_out = 0`.
pub fn strengths_for_snapshot(s: &NetworkSnapshot) -> Vec<StrengthVector> {
    let layers = s.layers();
    let sizes = s.neuron_layer_sizes();
    (0..sizes.len())
        .map(|n| {
            let s_in = if n == 0 {
                vec![0.0; sizes[0]]
            } else {
                block_in_strengths(&layers[n - 1])
            };
            let s_out = if n == layers.len() {
                vec![0.0; sizes[n]]
            } else {
                block_out_strengths(&layers[n])
            };
            StrengthVector::new(n, s_in, s_out)
        })
        .collect()
}
