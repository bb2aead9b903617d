use serde::{Deserialize, Serialize};

use crate::numeric::CompensatedSum;
use crate::snapshot::{Conv2d, LayerWeights};

/// Mean and population variance of the link weights of one parameter block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerLinkStats {
    pub layer_index: usize,
    pub mu: f64,
    pub delta: f64,
    /// Number of graph links the statistics were taken over.
    pub links: u64,
}

/// How shared convolution weights enter the link statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkStatsMode {
    /// Every realized edge of the unrolled graph counts once, so a kernel
    /// entry is weighted by how many output positions it reaches.
    #[default]
    Realized,
    /// Every stored kernel entry counts once.
    UniqueWeights,
}

/// Link-weight mean and variance for a block, over the realized edge multiset.
pub fn link_weight_stats(layer: &LayerWeights) -> LayerLinkStats {
    link_weight_stats_with(layer, LinkStatsMode::Realized)
}

pub fn link_weight_stats_with(layer: &LayerWeights, mode: LinkStatsMode) -> LayerLinkStats {
    match (layer, mode) {
        (LayerWeights::Conv2d(c), LinkStatsMode::Realized) => conv_realized(c),
        _ => {
            let w = layer.weight_values();
            let (mu, delta) = crate::numeric::mean_and_population_variance(w).unwrap_or((0.0, 0.0));
            LayerLinkStats {
                layer_index: 0,
                mu,
                delta,
                links: w.len() as u64,
            }
        }
    }
}

/// Number of graph edges realized by each `(kh, kw)` kernel offset, per
/// `(c_in, c_out)` pair.
pub(crate) fn offset_multiplicities(conv: &Conv2d) -> Vec<u64> {
    let (rows, cols) = conv.axes();
    let [kh, kw, _, _] = conv.kernel().shape();
    let mr: Vec<u64> = (0..kh).map(|k| rows.offset_multiplicity(k) as u64).collect();
    let mc: Vec<u64> = (0..kw).map(|k| cols.offset_multiplicity(k) as u64).collect();
    mr.iter().flat_map(|&a| mc.iter().map(move |&b| a * b)).collect()
}

fn conv_realized(conv: &Conv2d) -> LayerLinkStats {
    let [_, _, ci, co] = conv.kernel().shape();
    let mult = offset_multiplicities(conv);
    let kernel = conv.kernel();
    let block = ci * co;
    let links: u64 = mult.iter().sum::<u64>() * block as u64;

    let weighted = |f: &dyn Fn(f64) -> f64| -> f64 {
        let mut acc = CompensatedSum::new();
        for (off, &m) in mult.iter().enumerate() {
            if m == 0 {
                continue;
            }
            let base = off * block;
            let mut local = CompensatedSum::new();
            for &w in &kernel.as_slice()[base..base + block] {
                local.add(f(w));
            }
            acc.add(local.value() * m as f64);
        }
        acc.value()
    };
    let total = links as f64;
    let first = kernel.as_slice()[0];
    let mu = if kernel.as_slice().iter().all(|&w| w == first) {
        first
    } else {
        weighted(&|w| w) / total
    };
    let delta = weighted(&|w| (w - mu) * (w - mu)) / total;
    LayerLinkStats {
        layer_index: 0,
        mu,
        delta,
        links,
    }
}
