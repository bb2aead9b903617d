//! CNTS container: `b"CNTS"`, `u16` version, `u32` header length (both
//! little-endian), a UTF-8 JSON header, then the tensor payload.
//!
//! The payload is a sequence of little-endian `f64` values. For every block
//! the header records byte offsets (relative to the payload start) of its
//! weights and bias. Dense weights are row-major `(inputs, outputs)`;
//! kernels are row-major `(kh, kw, c_in, c_out)`.
//!
//! A pure-JSON variant with nested arrays is accepted by [`read_snapshot`]
//! when the input starts with `{`.

use serde::{Deserialize, Serialize};

use super::{Conv2d, Dense, Kernel, LayerWeights, MapDims, Matrix, NetworkSnapshot, Padding, SnapshotMeta};
use crate::error::{Error, Result};

pub const CNTS_MAGIC: &[u8; 4] = b"CNTS";
pub const CNTS_VERSION: u16 = 1;
const PREAMBLE: usize = 4 + 2 + 4;
const JSON_FORMAT_TAG: &str = "cnts-json";

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    meta: SnapshotMeta,
    layers: Vec<LayerDescriptor>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum LayerDescriptor {
    Dense {
        rows: usize,
        cols: usize,
        weights_offset: u64,
        bias_offset: u64,
    },
    Conv2d {
        kernel_shape: [usize; 4],
        stride: [usize; 2],
        padding: Padding,
        input_dims: [usize; 3],
        weights_offset: u64,
        bias_offset: u64,
    },
}

/// Reads a snapshot from either the CNTS binary container or the JSON
/// variant, and validates it.
pub fn read_snapshot(bytes: &[u8]) -> Result<NetworkSnapshot> {
    if bytes.starts_with(CNTS_MAGIC) {
        return read_binary(bytes);
    }
    match bytes.iter().find(|b| !b.is_ascii_whitespace()) {
        Some(b'{') => read_snapshot_json(bytes),
        _ => {
            let magic: Vec<u8> = bytes.iter().take(4).copied().collect();
            Err(Error::Format(format!(
                "bad magic {:?}, expected \"CNTS\"",
                String::from_utf8_lossy(&magic)
            )))
        }
    }
}

pub fn write_snapshot(s: &NetworkSnapshot) -> Vec<u8> {
    let mut payload: Vec<u8> = Vec::new();
    let push = |values: &[f64], payload: &mut Vec<u8>| -> u64 {
        let offset = payload.len() as u64;
        for v in values {
            payload.extend_from_slice(&v.to_le_bytes());
        }
        offset
    };
    let layers = s
        .layers()
        .iter()
        .map(|layer| match layer {
            LayerWeights::Dense(d) => {
                let weights_offset = push(d.weights().as_slice(), &mut payload);
                let bias_offset = push(d.bias(), &mut payload);
                LayerDescriptor::Dense {
                    rows: d.inputs(),
                    cols: d.outputs(),
                    weights_offset,
                    bias_offset,
                }
            }
            LayerWeights::Conv2d(c) => {
                let weights_offset = push(c.kernel().as_slice(), &mut payload);
                let bias_offset = push(c.bias(), &mut payload);
                let dims = c.input_dims();
                LayerDescriptor::Conv2d {
                    kernel_shape: c.kernel().shape(),
                    stride: c.stride(),
                    padding: c.padding(),
                    input_dims: [dims.height, dims.width, dims.channels],
                    weights_offset,
                    bias_offset,
                }
            }
        })
        .collect();
    let header = Header {
        meta: s.meta().clone(),
        layers,
    };
    let header = serde_json::to_vec(&header).expect("header serialization is infallible");
    let mut out = Vec::with_capacity(PREAMBLE + header.len() + payload.len());
    out.extend_from_slice(CNTS_MAGIC);
    out.extend_from_slice(&CNTS_VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(&header);
    out.extend_from_slice(&payload);
    out
}

fn read_binary(bytes: &[u8]) -> Result<NetworkSnapshot> {
    if bytes.len() < PREAMBLE {
        return Err(Error::Format("truncated CNTS preamble".into()));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != CNTS_VERSION {
        return Err(Error::Format(format!("unsupported CNTS version {version}")));
    }
    let header_len = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
    let header_end = PREAMBLE
        .checked_add(header_len)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| Error::Format("header length runs past end of file".into()))?;
    let header: Header = serde_json::from_slice(&bytes[PREAMBLE..header_end])
        .map_err(|e| Error::Format(format!("bad CNTS header: {e}")))?;
    let payload = &bytes[header_end..];

    let mut consumed = 0usize;
    let mut take = |offset: u64, count: usize| -> Result<Vec<f64>> {
        let start = usize::try_from(offset).map_err(|_| Error::Format("offset overflow".into()))?;
        if start != consumed {
            return Err(Error::Format(format!(
                "tensor offset {start} does not follow previous tensor end {consumed}"
            )));
        }
        let end = count
            .checked_mul(8)
            .and_then(|n| start.checked_add(n))
            .filter(|&e| e <= payload.len())
            .ok_or_else(|| Error::Format("tensor runs past end of payload".into()))?;
        consumed = end;
        Ok(payload[start..end]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    };

    let mut layers = Vec::with_capacity(header.layers.len());
    for (i, desc) in header.layers.into_iter().enumerate() {
        let layer = match desc {
            LayerDescriptor::Dense {
                rows,
                cols,
                weights_offset,
                bias_offset,
            } => {
                let w = take(weights_offset, rows.saturating_mul(cols))?;
                let b = take(bias_offset, cols)?;
                LayerWeights::Dense(Dense::new(Matrix::new(rows, cols, w)?, b).map_err(|e| in_layer(i, e))?)
            }
            LayerDescriptor::Conv2d {
                kernel_shape,
                stride,
                padding,
                input_dims,
                weights_offset,
                bias_offset,
            } => {
                let n = kernel_shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d));
                let n = n.ok_or_else(|| Error::Format("kernel size overflow".into()))?;
                let w = take(weights_offset, n)?;
                let b = take(bias_offset, kernel_shape[3])?;
                let kernel = Kernel::new(kernel_shape, w).map_err(|e| in_layer(i, e))?;
                let dims = MapDims::new(input_dims[0], input_dims[1], input_dims[2]);
                LayerWeights::Conv2d(Conv2d::new(kernel, b, stride, padding, dims).map_err(|e| in_layer(i, e))?)
            }
        };
        layers.push(layer);
    }
    if consumed != payload.len() {
        return Err(Error::Format(format!(
            "{} trailing payload bytes",
            payload.len() - consumed
        )));
    }
    NetworkSnapshot::new(layers, header.meta)
}

fn in_layer(i: usize, e: Error) -> Error {
    match e {
        Error::Validation(m) => Error::Validation(format!("layer {i}: {m}")),
        other => other,
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct JsonSnapshot {
    format: String,
    version: u16,
    meta: SnapshotMeta,
    layers: Vec<JsonLayer>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum JsonLayer {
    Dense {
        weights: Vec<Vec<f64>>,
        bias: Vec<f64>,
    },
    Conv2d {
        kernel: Vec<Vec<Vec<Vec<f64>>>>,
        bias: Vec<f64>,
        stride: [usize; 2],
        padding: Padding,
        input_dims: [usize; 3],
    },
}

pub fn read_snapshot_json(bytes: &[u8]) -> Result<NetworkSnapshot> {
    let doc: JsonSnapshot =
        serde_json::from_slice(bytes).map_err(|e| Error::Format(format!("bad JSON snapshot: {e}")))?;
    if doc.format != JSON_FORMAT_TAG || doc.version != CNTS_VERSION {
        return Err(Error::Format(format!(
            "unsupported JSON snapshot {} v{}",
            doc.format, doc.version
        )));
    }
    let mut layers = Vec::with_capacity(doc.layers.len());
    for (i, layer) in doc.layers.into_iter().enumerate() {
        let layer = match layer {
            JsonLayer::Dense { weights, bias } => {
                let m = Matrix::from_rows(&weights).map_err(|e| in_layer(i, e))?;
                LayerWeights::Dense(Dense::new(m, bias).map_err(|e| in_layer(i, e))?)
            }
            JsonLayer::Conv2d {
                kernel,
                bias,
                stride,
                padding,
                input_dims,
            } => {
                let kh = kernel.len();
                let kw = kernel.first().map_or(0, Vec::len);
                let ci = kernel.first().and_then(|r| r.first()).map_or(0, Vec::len);
                let co = kernel
                    .first()
                    .and_then(|r| r.first())
                    .and_then(|r| r.first())
                    .map_or(0, Vec::len);
                let mut data = Vec::with_capacity(kh * kw * ci * co);
                for a in &kernel {
                    for b in a {
                        for c in b {
                            if a.len() != kw || b.len() != ci || c.len() != co {
                                return Err(Error::Validation(format!("layer {i}: ragged kernel array")));
                            }
                            data.extend_from_slice(c);
                        }
                    }
                }
                let kernel = Kernel::new([kh, kw, ci, co], data).map_err(|e| in_layer(i, e))?;
                let dims = MapDims::new(input_dims[0], input_dims[1], input_dims[2]);
                LayerWeights::Conv2d(Conv2d::new(kernel, bias, stride, padding, dims).map_err(|e| in_layer(i, e))?)
            }
        };
        layers.push(layer);
    }
    NetworkSnapshot::new(layers, doc.meta)
}

pub fn write_snapshot_json(s: &NetworkSnapshot) -> Vec<u8> {
    let layers = s
        .layers()
        .iter()
        .map(|layer| match layer {
            LayerWeights::Dense(d) => JsonLayer::Dense {
                weights: d.weights().to_rows(),
                bias: d.bias().to_vec(),
            },
            LayerWeights::Conv2d(c) => {
                let [kh, kw, ci, co] = c.kernel().shape();
                let kernel = (0..kh)
                    .map(|a| {
                        (0..kw)
                            .map(|b| (0..ci).map(|x| (0..co).map(|y| c.kernel().get(a, b, x, y)).collect()).collect())
                            .collect()
                    })
                    .collect();
                let dims = c.input_dims();
                JsonLayer::Conv2d {
                    kernel,
                    bias: c.bias().to_vec(),
                    stride: c.stride(),
                    padding: c.padding(),
                    input_dims: [dims.height, dims.width, dims.channels],
                }
            }
        })
        .collect();
    let doc = JsonSnapshot {
        format: JSON_FORMAT_TAG.into(),
        version: CNTS_VERSION,
        meta: s.meta().clone(),
        layers,
    };
    serde_json::to_vec_pretty(&doc).expect("snapshot JSON serialization is infallible")
}
