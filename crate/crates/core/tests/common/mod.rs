#![allow(dead_code)]

use cnt_core::snapshot::{
    Conv2d, Dense, Kernel, LayerWeights, MapDims, Matrix, NetworkSnapshot, Padding, SnapshotMeta,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_dense(r: &mut ChaCha8Rng, rows: usize, cols: usize) -> Dense {
    let data = (0..rows * cols).map(|_| r.random_range(-1.0..1.0)).collect();
    let bias = (0..cols).map(|_| r.random_range(-1.0..1.0)).collect();
    Dense::new(Matrix::new(rows, cols, data).unwrap(), bias).unwrap()
}

#[derive(Debug, Clone, Copy)]
pub struct ConvGeometry {
    pub height: usize,
    pub width: usize,
    pub c_in: usize,
    pub c_out: usize,
    pub kh: usize,
    pub kw: usize,
    pub stride: [usize; 2],
    pub padding: Padding,
}

/// Spatial <= 12x12, kernel <= 5x5, channels <= 4, strides {1, 2}.
pub fn random_geometry(r: &mut ChaCha8Rng) -> ConvGeometry {
    let height = r.random_range(1..=12);
    let width = r.random_range(1..=12);
    let padding = if r.random_bool(0.5) { Padding::Same } else { Padding::Valid };
    let (max_kh, max_kw) = match padding {
        Padding::Valid => (height.min(5), width.min(5)),
        Padding::Same => (5, 5),
    };
    ConvGeometry {
        height,
        width,
        c_in: r.random_range(1..=4),
        c_out: r.random_range(1..=4),
        kh: r.random_range(1..=max_kh),
        kw: r.random_range(1..=max_kw),
        stride: [[1, 2][r.random_range(0..2)], [1, 2][r.random_range(0..2)]],
        padding,
    }
}

pub fn random_conv(r: &mut ChaCha8Rng, g: ConvGeometry) -> Conv2d {
    let k = Kernel::from_fn([g.kh, g.kw, g.c_in, g.c_out], |_, _, _, _| r.random_range(-1.0..1.0)).unwrap();
    let bias = vec![0.5; g.c_out];
    Conv2d::new(k, bias, g.stride, g.padding, MapDims::new(g.height, g.width, g.c_in)).unwrap()
}

pub fn single(layer: LayerWeights) -> NetworkSnapshot {
    NetworkSnapshot::new(vec![layer], SnapshotMeta::default()).unwrap()
}

/// One explicit link: (source neuron, target neuron, weight).
pub type Link = (usize, usize, f64);

/// Output size and leading padding along one axis.
fn axis(input: usize, kernel: usize, stride: usize, padding: Padding) -> (usize, usize) {
    match padding {
        Padding::Valid => ((input - kernel) / stride + 1, 0),
        Padding::Same => {
            let out = input.div_ceil(stride);
            let total = ((out - 1) * stride + kernel).saturating_sub(input);
            (out, total / 2)
        }
    }
}

/// Enumerates every link a convolution realizes by sliding the kernel over
/// the (padded) input, skipping taps that fall on padding.
pub fn conv_links(c: &Conv2d) -> (usize, usize, Vec<Link>) {
    let d = c.input_dims();
    let [kh, kw, c_in, c_out] = c.kernel().shape();
    let [sr, sc] = c.stride();
    let (oh, pr) = axis(d.height, kh, sr, c.padding());
    let (ow, pc) = axis(d.width, kw, sc, c.padding());
    let mut links = Vec::new();
    for co in 0..c_out {
        for r in 0..oh {
            for q in 0..ow {
                let to = (co * oh + r) * ow + q;
                for a in 0..kh {
                    for b in 0..kw {
                        let ir = (r * sr + a) as isize - pr as isize;
                        let ic = (q * sc + b) as isize - pc as isize;
                        if ir < 0 || ic < 0 || ir >= d.height as isize || ic >= d.width as isize {
                            continue;
                        }
                        for ci in 0..c_in {
                            let from = (ci * d.height + ir as usize) * d.width + ic as usize;
                            links.push((from, to, c.kernel().get(a, b, ci, co)));
                        }
                    }
                }
            }
        }
    }
    (d.len(), oh * ow * c_out, links)
}

pub fn dense_links(d: &Dense) -> (usize, usize, Vec<Link>) {
    let w = d.weights();
    let mut links = Vec::with_capacity(w.rows() * w.cols());
    for i in 0..w.rows() {
        for j in 0..w.cols() {
            links.push((i, j, w.get(i, j)));
        }
    }
    (w.rows(), w.cols(), links)
}

#[derive(Debug, Clone)]
pub struct NaiveBlock {
    pub mu: f64,
    pub delta: f64,
    pub s_out: Vec<f64>,
    pub s_in: Vec<f64>,
}

/// Plain left-to-right sums, two passes for the variance.
pub fn naive_block(n_from: usize, n_to: usize, links: &[Link]) -> NaiveBlock {
    let mut s_out = vec![0.0; n_from];
    let mut s_in = vec![0.0; n_to];
    let mut total = 0.0;
    for &(f, t, w) in links {
        s_out[f] += w;
        s_in[t] += w;
        total += w;
    }
    let mu = total / links.len() as f64;
    let mut sq = 0.0;
    for &(_, _, w) in links {
        sq += (w - mu) * (w - mu);
    }
    NaiveBlock {
        mu,
        delta: sq / links.len() as f64,
        s_out,
        s_in,
    }
}

pub fn population_std(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Largest relative error between backprop and central differences (step
/// 1e-5) over every weight and bias of a random ReLU net with at most 3
/// blocks and 16 units per layer. Entries where both values are below 1e-9
/// are compared absolutely.
pub fn gradient_check(seed: u64) -> f64 {
    use cnt_core::trainer::{cross_entropy, cross_entropy_gradients, Dataset};
    let mut r = rng(seed);
    let depth = r.random_range(1..=3);
    let sizes: Vec<usize> = (0..=depth).map(|_| r.random_range(2..=16)).collect();
    let classes = *sizes.last().unwrap();
    let layers: Vec<LayerWeights> = sizes
        .windows(2)
        .map(|w| {
            let data = (0..w[0] * w[1]).map(|_| r.random_range(-1.0..1.0)).collect();
            let bias = (0..w[1]).map(|_| r.random_range(-0.5..0.5)).collect();
            LayerWeights::Dense(Dense::new(Matrix::new(w[0], w[1], data).unwrap(), bias).unwrap())
        })
        .collect();
    let n = 6;
    let x = (0..n * sizes[0]).map(|_| r.random::<f64>()).collect();
    let labels = (0..n).map(|_| r.random_range(0..classes)).collect();
    let data = Dataset::new(Matrix::new(n, sizes[0], x).unwrap(), labels, classes).unwrap();
    let net = NetworkSnapshot::new(layers.clone(), SnapshotMeta::default()).unwrap();
    let (_, grads) = cross_entropy_gradients(&net, &data).unwrap();

    let h = 1e-5;
    let perturbed = |b: usize, idx: usize, is_bias: bool, delta: f64| {
        let mut ls = layers.clone();
        let LayerWeights::Dense(d) = &ls[b] else { unreachable!() };
        let mut w = d.weights().clone();
        let mut bias = d.bias().to_vec();
        if is_bias {
            bias[idx] += delta;
        } else {
            w.as_mut_slice()[idx] += delta;
        }
        ls[b] = LayerWeights::Dense(Dense::new(w, bias).unwrap());
        cross_entropy(&NetworkSnapshot::new(ls, SnapshotMeta::default()).unwrap(), &data).unwrap()
    };
    let mut worst: f64 = 0.0;
    for b in 0..layers.len() {
        let params = grads.weights[b]
            .as_slice()
            .iter()
            .enumerate()
            .map(|(i, &g)| (i, false, g))
            .chain(grads.biases[b].iter().enumerate().map(|(i, &g)| (i, true, g)));
        for (idx, is_bias, analytic) in params {
            let numeric = (perturbed(b, idx, is_bias, h) - perturbed(b, idx, is_bias, -h)) / (2.0 * h);
            let scale = analytic.abs().max(numeric.abs());
            let err = if scale < 1e-9 { (analytic - numeric).abs() } else { (analytic - numeric).abs() / scale };
            worst = worst.max(err);
        }
    }
    worst
}
