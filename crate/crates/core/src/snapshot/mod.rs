//! Network-as-graph data model.
//!
//! A [`NetworkSnapshot`] is an ordered chain of parameter blocks
//! ([`LayerWeights`]). Block `b` connects neuron layer `b` to neuron layer
//! `b + 1`, so a snapshot with `B` blocks has `B + 1` neuron layers, the
//! first being the network input.
//!
//! Conv activation maps are flattened channel-major (channel, row, column);
//! see [`MapDims::flatten`]. Kernels are stored in `(kh, kw, c_in, c_out)`
//! order. Biases are kept so snapshots stay complete, but no metric reads
//! them.

mod format;
mod geometry;

pub use format::{read_snapshot, read_snapshot_json, write_snapshot, write_snapshot_json, CNTS_MAGIC, CNTS_VERSION};
pub use geometry::{AxisGeometry, ConvCoord, MapDims, NeuronId, Padding};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Validation(format!("matrix must be non-empty, got {rows}x{cols}")));
        }
        if data.len() != rows * cols {
            return Err(Error::Validation(format!(
                "matrix {rows}x{cols} needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Validation("matrix rows have unequal lengths".into()));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.cols).map(<[f64]>::to_vec).collect()
    }
}

/// Rank-4 convolution kernel indexed `(kh, kw, c_in, c_out)`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    shape: [usize; 4],
    data: Vec<f64>,
}

impl Kernel {
    pub fn new(shape: [usize; 4], data: Vec<f64>) -> Result<Self> {
        if shape.contains(&0) {
            return Err(Error::Validation(format!("kernel dims must be >= 1, got {shape:?}")));
        }
        let n: usize = shape.iter().product();
        if data.len() != n {
            return Err(Error::Validation(format!(
                "kernel {shape:?} needs {n} values, got {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn from_fn(shape: [usize; 4], mut f: impl FnMut(usize, usize, usize, usize) -> f64) -> Result<Self> {
        let [kh, kw, ci, co] = shape;
        let mut data = Vec::with_capacity(kh * kw * ci * co);
        for a in 0..kh {
            for b in 0..kw {
                for c in 0..ci {
                    for d in 0..co {
                        data.push(f(a, b, c, d));
                    }
                }
            }
        }
        Self::new(shape, data)
    }

    pub fn shape(&self) -> [usize; 4] {
        self.shape
    }

    #[inline]
    pub fn get(&self, kh: usize, kw: usize, ci: usize, co: usize) -> f64 {
        let [_, w, c, o] = self.shape;
        self.data[((kh * w + kw) * c + ci) * o + co]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    weights: Matrix,
    bias: Vec<f64>,
}

impl Dense {
    /// `weights` has one row per input neuron and one column per output.
    pub fn new(weights: Matrix, bias: Vec<f64>) -> Result<Self> {
        if bias.len() != weights.cols() {
            return Err(Error::Validation(format!(
                "dense bias has length {}, expected {}",
                bias.len(),
                weights.cols()
            )));
        }
        let layer = Self { weights, bias };
        layer.check_finite()?;
        Ok(layer)
    }

    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            weights: Matrix::zeros(inputs, outputs),
            bias: vec![0.0; outputs],
        }
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn inputs(&self) -> usize {
        self.weights.rows()
    }

    pub fn outputs(&self) -> usize {
        self.weights.cols()
    }

    pub(crate) fn parts_mut(&mut self) -> (&mut Matrix, &mut Vec<f64>) {
        (&mut self.weights, &mut self.bias)
    }

    fn check_finite(&self) -> Result<()> {
        if let Some(pos) = self.weights.as_slice().iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "non-finite weight at ({}, {})",
                pos / self.weights.cols(),
                pos % self.weights.cols()
            )));
        }
        if self.bias.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("non-finite bias value".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d {
    kernel: Kernel,
    bias: Vec<f64>,
    stride: [usize; 2],
    padding: Padding,
    input_dims: MapDims,
    rows: AxisGeometry,
    cols: AxisGeometry,
}

impl Conv2d {
    pub fn new(kernel: Kernel, bias: Vec<f64>, stride: [usize; 2], padding: Padding, input_dims: MapDims) -> Result<Self> {
        let [kh, kw, ci, co] = kernel.shape();
        if ci != input_dims.channels {
            return Err(Error::Validation(format!(
                "kernel expects {ci} input channels, input map has {}",
                input_dims.channels
            )));
        }
        if bias.len() != co {
            return Err(Error::Validation(format!("conv bias has length {}, expected {co}", bias.len())));
        }
        if let Some(pos) = kernel.as_slice().iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!("non-finite kernel value at flat index {pos}")));
        }
        if bias.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("non-finite bias value".into()));
        }
        let rows = AxisGeometry::new(input_dims.height, kh, stride[0], padding)?;
        let cols = AxisGeometry::new(input_dims.width, kw, stride[1], padding)?;
        Ok(Self {
            kernel,
            bias,
            stride,
            padding,
            input_dims,
            rows,
            cols,
        })
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn stride(&self) -> [usize; 2] {
        self.stride
    }

    pub fn padding(&self) -> Padding {
        self.padding
    }

    pub fn input_dims(&self) -> MapDims {
        self.input_dims
    }

    pub fn output_dims(&self) -> MapDims {
        MapDims::new(self.rows.output, self.cols.output, self.kernel.shape()[3])
    }

    /// Row (height) and column (width) axis geometry.
    pub fn axes(&self) -> (&AxisGeometry, &AxisGeometry) {
        (&self.rows, &self.cols)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LayerWeights {
    Dense(Dense),
    Conv2d(Conv2d),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Input,
    Output,
}

impl LayerWeights {
    pub fn neuron_count(&self, side: Side) -> usize {
        match (self, side) {
            (Self::Dense(d), Side::Input) => d.inputs(),
            (Self::Dense(d), Side::Output) => d.outputs(),
            (Self::Conv2d(c), Side::Input) => c.input_dims().len(),
            (Self::Conv2d(c), Side::Output) => c.output_dims().len(),
        }
    }

    /// Number of stored weight parameters (biases excluded).
    pub fn weight_count(&self) -> usize {
        match self {
            Self::Dense(d) => d.weights.as_slice().len(),
            Self::Conv2d(c) => c.kernel.as_slice().len(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::Dense(_) => "dense",
            Self::Conv2d(_) => "conv2d",
        }
    }

    /// The stored weights, without biases.
    pub fn weight_values(&self) -> &[f64] {
        match self {
            Self::Dense(d) => d.weights.as_slice(),
            Self::Conv2d(c) => c.kernel.as_slice(),
        }
    }

    pub fn bias(&self) -> &[f64] {
        match self {
            Self::Dense(d) => d.bias(),
            Self::Conv2d(c) => c.bias(),
        }
    }
}

/// `neuron_count` as a free function over a block.
pub fn neuron_count(layer: &LayerWeights, side: Side) -> usize {
    layer.neuron_count(side)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitFamily {
    Normal,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputActivation {
    Softmax,
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotMeta {
    pub accuracy: f64,
    pub epoch: u64,
    pub init_family: InitFamily,
    /// Standard deviation for `Normal`, half-support for `Uniform`.
    pub init_scale: f64,
    pub seed: u64,
    pub task_tag: String,
    pub output_activation: OutputActivation,
}

impl Default for SnapshotMeta {
    fn default() -> Self {
        Self {
            accuracy: 0.0,
            epoch: 0,
            init_family: InitFamily::Normal,
            init_scale: 0.05,
            seed: 0,
            task_tag: String::new(),
            output_activation: OutputActivation::Softmax,
        }
    }
}

impl SnapshotMeta {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.accuracy) {
            return Err(Error::Validation(format!("accuracy {} outside [0, 1]", self.accuracy)));
        }
        if !(self.init_scale > 0.0 && self.init_scale.is_finite()) {
            return Err(Error::Validation(format!("init_scale must be positive, got {}", self.init_scale)));
        }
        Ok(())
    }
}

/// Parameters of one network at one training moment. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSnapshot {
    layers: Vec<LayerWeights>,
    meta: SnapshotMeta,
}

impl NetworkSnapshot {
    pub fn new(layers: Vec<LayerWeights>, meta: SnapshotMeta) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Validation("snapshot has no layers".into()));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            let out = pair[0].neuron_count(Side::Output);
            let inp = pair[1].neuron_count(Side::Input);
            if out != inp {
                return Err(Error::Validation(format!(
                    "layers {i}/{} are shape-incompatible: layer {i} emits {out} neurons, layer {} takes {inp}",
                    i + 1,
                    i + 1
                )));
            }
        }
        meta.validate()?;
        Ok(Self { layers, meta })
    }

    pub fn layers(&self) -> &[LayerWeights] {
        &self.layers
    }

    pub fn meta(&self) -> &SnapshotMeta {
        &self.meta
    }

    /// Neuron counts for every neuron layer, input first.
    pub fn neuron_layer_sizes(&self) -> Vec<usize> {
        std::iter::once(self.layers[0].neuron_count(Side::Input))
            .chain(self.layers.iter().map(|l| l.neuron_count(Side::Output)))
            .collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weight_count() + l.bias().len()).sum()
    }

    pub fn with_meta(&self, meta: SnapshotMeta) -> Result<Self> {
        meta.validate()?;
        Ok(Self {
            layers: self.layers.clone(),
            meta,
        })
    }

    #[cfg(test)]
    pub(crate) fn from_parts_unchecked(layers: Vec<LayerWeights>, meta: SnapshotMeta) -> Self {
        Self { layers, meta }
    }
}

/// Marks the output layer as linear. Weights are untouched; idempotent.
pub fn strip_output_softmax(s: &NetworkSnapshot) -> NetworkSnapshot {
    let mut meta = s.meta.clone();
    meta.output_activation = OutputActivation::Linear;
    NetworkSnapshot {
        layers: s.layers.clone(),
        meta,
    }
}
