//! Histograms and central moments of a sample.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{self, CompensatedSum};

/// Below this variance skewness and kurtosis are reported as undefined.
pub const MOMENT_VARIANCE_FLOOR: f64 = 1e-15;
pub const DEFAULT_HISTOGRAM_BINS: usize = 100;

/// Density-normalized histogram. `edges.len() == densities.len() + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub densities: Vec<f64>,
}

impl Histogram {
    /// `Σ density · width`; 1 up to rounding.
    pub fn total_mass(&self) -> f64 {
        numeric::sum(
            self.densities
                .iter()
                .zip(self.edges.windows(2))
                .map(|(d, e)| d * (e[1] - e[0])),
        )
    }

    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|e| 0.5 * (e[0] + e[1])).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionSummary {
    pub n: usize,
    pub mean: f64,
    /// Population variance.
    pub variance: f64,
    /// Fisher-Pearson `g1 = m3 / m2^(3/2)`; `None` for (near-)constant samples.
    pub skewness: Option<f64>,
    /// Excess kurtosis `g2 = m4 / m2² - 3`; `None` for (near-)constant samples.
    pub kurtosis: Option<f64>,
    pub histogram: Histogram,
}

/// Equal-width edges over `[lo, hi]`. A degenerate range is widened by 0.5
/// on each side so every bin has positive width.
pub fn histogram_edges(lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
    let width = (hi - lo) / bins as f64;
    let mut edges: Vec<f64> = (0..bins).map(|i| lo + width * i as f64).collect();
    edges.push(hi);
    edges
}

/// Bins `samples` on the given edges. The last bin is closed on the right;
/// values outside the edges are clamped into the outer bins.
pub fn histogram_on(samples: &[f64], edges: &[f64]) -> Histogram {
    let bins = edges.len() - 1;
    let lo = edges[0];
    let hi = edges[bins];
    let mut counts = vec![0usize; bins];
    for &x in samples {
        let guess = ((x - lo) / (hi - lo) * bins as f64).floor();
        let mut i = if guess.is_nan() || guess < 0.0 {
            0
        } else {
            (guess as usize).min(bins - 1)
        };
        while i > 0 && x < edges[i] {
            i -= 1;
        }
        while i + 1 < bins && x >= edges[i + 1] {
            i += 1;
        }
        counts[i] += 1;
    }
    let n = samples.len().max(1) as f64;
    let densities = counts
        .iter()
        .zip(edges.windows(2))
        .map(|(&c, e)| c as f64 / (n * (e[1] - e[0])))
        .collect();
    Histogram {
        edges: edges.to_vec(),
        densities,
    }
}

/// Mean, population variance, and the `g1`/`g2` shape statistics.
pub fn moments(samples: &[f64]) -> Result<(f64, f64, Option<f64>, Option<f64>)> {
    let mean = numeric::mean(samples).ok_or_else(|| Error::Argument("moments of an empty sample".into()))?;
    let n = samples.len() as f64;
    let (mut m2, mut m3, mut m4) = (CompensatedSum::new(), CompensatedSum::new(), CompensatedSum::new());
    for &x in samples {
        let d = x - mean;
        let d2 = d * d;
        m2.add(d2);
        m3.add(d2 * d);
        m4.add(d2 * d2);
    }
    let (m2, m3, m4) = (m2.value() / n, m3.value() / n, m4.value() / n);
    if m2 < MOMENT_VARIANCE_FLOOR {
        return Ok((mean, m2, None, None));
    }
    Ok((mean, m2, Some(m3 / m2.powf(1.5)), Some(m4 / (m2 * m2) - 3.0)))
}

/// Histogram over `[min, max]` with `bin_count` bins, plus moments.
pub fn summarize(samples: &[f64], bin_count: usize) -> Result<DistributionSummary> {
    let (lo, hi) = range(samples).ok_or_else(|| Error::Argument("summary of an empty sample".into()))?;
    summarize_on(samples, &histogram_edges(lo, hi, bin_count.max(1)))
}

/// Like [`summarize`] but on caller-provided histogram edges, so several
/// samples can share one binning.
pub fn summarize_on(samples: &[f64], edges: &[f64]) -> Result<DistributionSummary> {
    if edges.len() < 2 {
        return Err(Error::Argument("histogram needs at least one bin".into()));
    }
    let (mean, variance, skewness, kurtosis) = moments(samples)?;
    Ok(DistributionSummary {
        n: samples.len(),
        mean,
        variance,
        skewness,
        kurtosis,
        histogram: histogram_on(samples, edges),
    })
}

pub fn range(samples: &[f64]) -> Option<(f64, f64)> {
    let first = *samples.first()?;
    Some(samples.iter().fold((first, first), |(lo, hi), &x| (lo.min(x), hi.max(x))))
}

/// Gaussian kernel density estimate at `points`, Silverman bandwidth.
/// For plotting only; no statistic is derived from it.
pub fn kde(samples: &[f64], points: &[f64]) -> Vec<f64> {
    let n = samples.len();
    if n == 0 {
        return vec![0.0; points.len()];
    }
    let (_, var) = numeric::mean_and_population_variance(samples).unwrap_or((0.0, 0.0));
    let sd = var.sqrt();
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let pos = p * (n - 1) as f64;
        let i = pos.floor() as usize;
        let j = (i + 1).min(n - 1);
        sorted[i] + (sorted[j] - sorted[i]) * (pos - i as f64)
    };
    let iqr = q(0.75) - q(0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    let h = 0.9 * spread * (n as f64).powf(-0.2);
    if h <= 0.0 {
        return points.iter().map(|_| f64::NAN).collect();
    }
    let norm = 1.0 / (n as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    points
        .iter()
        .map(|&p| norm * numeric::sum(samples.iter().map(|&x| (-0.5 * ((p - x) / h).powi(2)).exp())))
        .collect()
}
