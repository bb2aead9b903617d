//! Convolution geometry along one spatial axis, and the neuron flattening
//! order shared by every module.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Padding {
    Valid,
    Same,
}

/// Resolved geometry of a convolution along a single spatial axis.
///
/// For `Same` padding the output length is `ceil(input / stride)` and the
/// total padding is split with the extra cell at the end (bottom/right).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AxisGeometry {
    pub input: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad_before: usize,
    pub pad_after: usize,
    pub output: usize,
}

impl AxisGeometry {
    pub fn new(input: usize, kernel: usize, stride: usize, padding: Padding) -> Result<Self> {
        if input == 0 || kernel == 0 || stride == 0 {
            return Err(Error::Validation(format!(
                "axis needs positive input/kernel/stride, got input={input} kernel={kernel} stride={stride}"
            )));
        }
        let (pad_before, pad_after, output) = match padding {
            Padding::Valid => {
                if kernel > input {
                    return Err(Error::Validation(format!(
                        "kernel extent {kernel} exceeds input extent {input} with valid padding"
                    )));
                }
                (0, 0, (input - kernel) / stride + 1)
            }
            Padding::Same => {
                let output = input.div_ceil(stride);
                let total = ((output - 1) * stride + kernel).saturating_sub(input);
                if kernel > input + total {
                    return Err(Error::Validation(format!(
                        "kernel extent {kernel} exceeds padded input extent {}",
                        input + total
                    )));
                }
                (total / 2, total - total / 2, output)
            }
        };
        Ok(Self {
            input,
            kernel,
            stride,
            pad_before,
            pad_after,
            output,
        })
    }

    /// Input coordinate touched by kernel offset `k` at output position `out`,
    /// or `None` when it lands in padding.
    #[inline]
    pub fn input_index(&self, out: usize, k: usize) -> Option<usize> {
        let padded = out * self.stride + k;
        if padded < self.pad_before {
            return None;
        }
        let idx = padded - self.pad_before;
        (idx < self.input).then_some(idx)
    }

    /// Output position reached from input coordinate `inp` through kernel
    /// offset `k`, if any.
    #[inline]
    pub fn output_index(&self, inp: usize, k: usize) -> Option<usize> {
        let padded = inp + self.pad_before;
        if padded < k {
            return None;
        }
        let rel = padded - k;
        if !rel.is_multiple_of(self.stride) {
            return None;
        }
        let out = rel / self.stride;
        (out < self.output).then_some(out)
    }

    /// Range of kernel offsets that land in-bounds for output position `out`.
    /// Offsets are contiguous along one axis.
    pub fn valid_offsets(&self, out: usize) -> std::ops::Range<usize> {
        let start = out * self.stride;
        let lo = self.pad_before.saturating_sub(start);
        let hi = (self.pad_before + self.input).saturating_sub(start).min(self.kernel);
        lo..hi.max(lo)
    }

    /// Number of output positions at which kernel offset `k` is in-bounds.
    pub fn offset_multiplicity(&self, k: usize) -> usize {
        (0..self.output)
            .filter(|&o| self.input_index(o, k).is_some())
            .count()
    }
}

/// Spatial coordinates of a neuron inside an activation map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConvCoord {
    pub channel: usize,
    pub row: usize,
    pub col: usize,
}

/// Dimensions of an activation map as (height, width, channels).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MapDims {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl MapDims {
    pub fn new(height: usize, width: usize, channels: usize) -> Self {
        Self {
            height,
            width,
            channels,
        }
    }

    pub fn len(&self) -> usize {
        self.height * self.width * self.channels
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Channel-major flattening: channel, then row, then column.
    #[inline]
    pub fn flatten(&self, c: ConvCoord) -> usize {
        (c.channel * self.height + c.row) * self.width + c.col
    }

    #[inline]
    pub fn unflatten(&self, flat: usize) -> ConvCoord {
        let col = flat % self.width;
        let rest = flat / self.width;
        ConvCoord {
            channel: rest / self.height,
            row: rest % self.height,
            col,
        }
    }
}

/// A neuron in the layered graph. `layer_index` counts neuron layers, with
/// the network input at 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NeuronId {
    pub layer_index: usize,
    pub flat_index: usize,
}
