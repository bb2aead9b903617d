//! Forward pass, softmax cross-entropy and its gradients.

use crate::error::{Error, Result};
use crate::snapshot::{Conv2d, Dense, LayerWeights, Matrix, NetworkSnapshot, Side};

use super::data::Dataset;

/// Output of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Forward {
    /// Pre-activation values of the last layer.
    pub logits: Vec<f64>,
    pub probabilities: Vec<f64>,
    /// Index of the largest logit; ties go to the lowest index.
    pub prediction: usize,
}

/// Softmax with max subtraction, finite for any finite input.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / total).collect()
}

/// `log Σ exp(z)`, stabilized.
pub fn log_sum_exp(logits: &[f64]) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln()
}

pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

fn dense_apply(d: &Dense, x: &[f64], out: &mut Vec<f64>) {
    out.clear();
    out.extend_from_slice(d.bias());
    let w = d.weights();
    for (i, &xi) in x.iter().enumerate() {
        if xi == 0.0 {
            continue;
        }
        for (o, &wij) in out.iter_mut().zip(w.row(i)) {
            *o += xi * wij;
        }
    }
}

fn conv_apply(c: &Conv2d, x: &[f64], out: &mut Vec<f64>) {
    let (rows, cols) = c.axes();
    let inp = c.input_dims();
    let od = c.output_dims();
    let [kh_n, kw_n, c_in, c_out] = c.kernel().shape();
    out.clear();
    out.resize(od.len(), 0.0);
    for co in 0..c_out {
        for r in 0..od.height {
            for q in 0..od.width {
                let mut acc = c.bias()[co];
                for kh in 0..kh_n {
                    let Some(ir) = rows.input_index(r, kh) else { continue };
                    for kw in 0..kw_n {
                        let Some(ic) = cols.input_index(q, kw) else { continue };
                        for ci in 0..c_in {
                            acc += c.kernel().get(kh, kw, ci, co) * x[(ci * inp.height + ir) * inp.width + ic];
                        }
                    }
                }
                out[(co * od.height + r) * od.width + q] = acc;
            }
        }
    }
}

/// Runs `x` through the network: ReLU after every block but the last, then
/// softmax.
pub fn forward(s: &NetworkSnapshot, x: &[f64]) -> Result<Forward> {
    let layers = s.layers();
    let expected = layers[0].neuron_count(Side::Input);
    if x.len() != expected {
        return Err(Error::Dimension { expected, got: x.len() });
    }
    let mut cur = x.to_vec();
    let mut next = Vec::new();
    for (b, layer) in layers.iter().enumerate() {
        match layer {
            LayerWeights::Dense(d) => dense_apply(d, &cur, &mut next),
            LayerWeights::Conv2d(c) => conv_apply(c, &cur, &mut next),
        }
        if b + 1 < layers.len() {
            next.iter_mut().for_each(|v| *v = v.max(0.0));
        }
        std::mem::swap(&mut cur, &mut next);
    }
    Ok(Forward {
        probabilities: softmax(&cur),
        prediction: argmax(&cur),
        logits: cur,
    })
}

/// Fraction of samples whose prediction equals the label.
pub fn accuracy(s: &NetworkSnapshot, data: &Dataset) -> Result<f64> {
    let mut hits = 0usize;
    for i in 0..data.len() {
        let (x, y) = data.sample(i);
        if forward(s, x)?.prediction == y {
            hits += 1;
        }
    }
    Ok(hits as f64 / data.len() as f64)
}

/// Gradients of the mean loss, one entry per dense block, shaped like the
/// block's weights and bias.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    fn zeros_like(layers: &[Dense]) -> Self {
        Self {
            weights: layers.iter().map(|d| Matrix::zeros(d.inputs(), d.outputs())).collect(),
            biases: layers.iter().map(|d| vec![0.0; d.outputs()]).collect(),
        }
    }
}

pub(crate) fn dense_layers(s: &NetworkSnapshot) -> Result<Vec<Dense>> {
    s.layers()
        .iter()
        .map(|l| match l {
            LayerWeights::Dense(d) => Ok(d.clone()),
            LayerWeights::Conv2d(_) => Err(Error::Argument("training supports dense blocks only".into())),
        })
        .collect()
}

fn check_dims(layers: &[Dense], data: &Dataset) -> Result<()> {
    let (first, last) = (&layers[0], &layers[layers.len() - 1]);
    if data.dim() != first.inputs() {
        return Err(Error::Dimension {
            expected: first.inputs(),
            got: data.dim(),
        });
    }
    if data.classes() > last.outputs() {
        return Err(Error::Dimension {
            expected: last.outputs(),
            got: data.classes(),
        });
    }
    Ok(())
}

/// Mean cross-entropy over `samples` and, when `grads` is given, its
/// gradient accumulated into it.
pub(crate) fn batch_loss(layers: &[Dense], data: &Dataset, samples: &[usize], mut grads: Option<&mut Gradients>) -> f64 {
    let n = samples.len() as f64;
    let depth = layers.len();
    // pre-activations per block; activations[0] is the input
    let mut pre: Vec<Vec<f64>> = vec![Vec::new(); depth];
    let mut act: Vec<Vec<f64>> = vec![Vec::new(); depth];
    let mut loss = 0.0;
    for &i in samples {
        let (x, y) = data.sample(i);
        for b in 0..depth {
            let input: &[f64] = if b == 0 { x } else { &act[b - 1] };
            let mut z = Vec::new();
            dense_apply(&layers[b], input, &mut z);
            act[b] = z.iter().map(|v| v.max(0.0)).collect();
            pre[b] = z;
        }
        let logits = &pre[depth - 1];
        loss += log_sum_exp(logits) - logits[y];

        let Some(g) = grads.as_deref_mut() else { continue };
        let mut delta = softmax(logits);
        delta[y] -= 1.0;
        for b in (0..depth).rev() {
            let input: &[f64] = if b == 0 { x } else { &act[b - 1] };
            let gw = g.weights[b].as_mut_slice();
            let cols = delta.len();
            for (r, &a) in input.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (gv, &d) in gw[r * cols..(r + 1) * cols].iter_mut().zip(&delta) {
                    *gv += a * d / n;
                }
            }
            for (gb, &d) in g.biases[b].iter_mut().zip(&delta) {
                *gb += d / n;
            }
            if b > 0 {
                let w = layers[b].weights();
                delta = (0..w.rows())
                    .map(|r| {
                        if pre[b - 1][r] > 0.0 {
                            w.row(r).iter().zip(&delta).map(|(wv, d)| wv * d).sum()
                        } else {
                            0.0
                        }
                    })
                    .collect();
            }
        }
    }
    loss / n
}

/// Mean softmax cross-entropy of a dense network over a dataset.
pub fn cross_entropy(s: &NetworkSnapshot, data: &Dataset) -> Result<f64> {
    let layers = dense_layers(s)?;
    check_dims(&layers, data)?;
    let all: Vec<usize> = (0..data.len()).collect();
    Ok(batch_loss(&layers, data, &all, None))
}

/// Mean cross-entropy and its analytic gradient by backpropagation.
pub fn cross_entropy_gradients(s: &NetworkSnapshot, data: &Dataset) -> Result<(f64, Gradients)> {
    let layers = dense_layers(s)?;
    check_dims(&layers, data)?;
    let all: Vec<usize> = (0..data.len()).collect();
    let mut g = Gradients::zeros_like(&layers);
    let loss = batch_loss(&layers, data, &all, Some(&mut g));
    Ok((loss, g))
}

pub(crate) fn sgd_step(layers: &mut [Dense], data: &Dataset, batch: &[usize], learning_rate: f64) -> f64 {
    let mut g = Gradients::zeros_like(layers);
    let loss = batch_loss(layers, data, batch, Some(&mut g));
    for (b, layer) in layers.iter_mut().enumerate() {
        let (w, bias) = layer.parts_mut();
        for (wv, gv) in w.as_mut_slice().iter_mut().zip(g.weights[b].as_slice()) {
            *wv -= learning_rate * gv;
        }
        for (bv, gv) in bias.iter_mut().zip(&g.biases[b]) {
            *bv -= learning_rate * gv;
        }
    }
    loss
}
