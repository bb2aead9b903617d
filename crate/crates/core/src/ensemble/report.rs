use std::cmp::Ordering;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::stats::{histogram_edges, kde, range, summarize_on, DistributionSummary, DEFAULT_HISTOGRAM_BINS};
use super::{check_topology, pool_layer_metric, AccuracyBins, Metric, BIN_COUNT};
use crate::error::{Error, Result};
use crate::metrics::MetricRecord;
use crate::numeric;

pub const ENSEMBLE_REPORT_SCHEMA: &str = "cnt.ensemble_report/1";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReportOptions {
    pub histogram_bins: usize,
    /// Resampling rounds over the records of each bin; 0 disables.
    pub bootstrap_rounds: usize,
    pub seed: u64,
    /// Attach a smoothed density, evaluated at histogram bin centers.
    pub kde: bool,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self {
            histogram_bins: DEFAULT_HISTOGRAM_BINS,
            bootstrap_rounds: 10,
            seed: 0,
            kde: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryEntry {
    pub metric: Metric,
    pub layer: usize,
    pub accuracy_bin: usize,
    pub summary: DistributionSummary,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kde: Option<Vec<f64>>,
}

/// Per (neuron layer, accuracy bin) statistics used to track trends across
/// accuracy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendEntry {
    pub layer: usize,
    pub accuracy_bin: usize,
    pub networks: usize,
    pub strength_variance: f64,
    pub strength_kurtosis: Option<f64>,
    pub mean_fluctuation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapRound {
    pub round: usize,
    pub trends: Vec<TrendEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleReport {
    pub schema: String,
    pub accuracy_edges: Vec<f64>,
    pub bin_counts: Vec<usize>,
    pub min_population: usize,
    pub underpopulated: Vec<usize>,
    pub topology: Vec<usize>,
    pub histogram_bins: usize,
    pub summaries: Vec<SummaryEntry>,
    pub trends: Vec<TrendEntry>,
    pub bootstrap: Vec<BootstrapRound>,
}

fn canonical_order(a: &MetricRecord, b: &MetricRecord) -> Ordering {
    let ka = (&a.snapshot_meta.task_tag, a.snapshot_meta.seed, a.snapshot_meta.epoch);
    let kb = (&b.snapshot_meta.task_tag, b.snapshot_meta.seed, b.snapshot_meta.epoch);
    a.snapshot_meta
        .accuracy
        .total_cmp(&b.snapshot_meta.accuracy)
        .then_with(|| ka.cmp(&kb))
        .then_with(|| {
            let fa = a.fluctuations.iter().map(|f| f.value);
            let fb = b.fluctuations.iter().map(|f| f.value);
            fa.zip(fb).map(|(x, y)| x.total_cmp(&y)).find(|o| o.is_ne()).unwrap_or(Ordering::Equal)
        })
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v
}

fn trends_for(bins: &[(usize, Vec<&MetricRecord>)], layers: usize) -> Result<Vec<TrendEntry>> {
    let mut out = Vec::new();
    for layer in 0..layers {
        for (k, recs) in bins {
            let owned: Vec<MetricRecord> = recs.iter().map(|r| (*r).clone()).collect();
            let strength = sorted(pool_layer_metric(&owned, layer, Metric::Strength, false)?);
            let fluct = sorted(pool_layer_metric(&owned, layer, Metric::Fluctuation, false)?);
            let (_, variance, _, kurtosis) = super::stats::moments(&strength)?;
            out.push(TrendEntry {
                layer,
                accuracy_bin: *k,
                networks: recs.len(),
                strength_variance: variance,
                strength_kurtosis: kurtosis,
                mean_fluctuation: numeric::mean(&fluct).unwrap_or(0.0),
            });
        }
    }
    Ok(out)
}

/// Summarizes every (metric, layer, occupied bin). Histograms of one
/// (metric, layer) share edges across bins. The result does not depend on
/// the order of records inside the bins.
pub fn ensemble_report(bins: &AccuracyBins, opts: &ReportOptions) -> Result<EnsembleReport> {
    let occupied: Vec<(usize, Vec<&MetricRecord>)> = (0..BIN_COUNT)
        .filter(|&k| !bins.bins[k].is_empty())
        .map(|k| {
            let mut recs: Vec<&MetricRecord> = bins.bins[k].iter().collect();
            recs.sort_by(|a, b| canonical_order(a, b));
            (k, recs)
        })
        .collect();
    if occupied.is_empty() {
        return Err(Error::Argument("every accuracy bin is empty".into()));
    }
    let all: Vec<MetricRecord> = occupied.iter().flat_map(|(_, r)| r.iter().map(|r| (*r).clone())).collect();
    check_topology(&all)?;
    let topology = all[0].topology();
    let with_weights = all.iter().all(|r| r.link_weights.is_some());
    let hist_bins = opts.histogram_bins.max(1);

    let mut summaries = Vec::new();
    for metric in Metric::ALL {
        if metric == Metric::LinkWeights && !with_weights {
            continue;
        }
        for layer in 0..metric.layer_count(&topology) {
            let pools = occupied
                .iter()
                .map(|(k, recs)| {
                    let owned: Vec<MetricRecord> = recs.iter().map(|r| (*r).clone()).collect();
                    Ok((*k, sorted(pool_layer_metric(&owned, layer, metric, false)?)))
                })
                .collect::<Result<Vec<_>>>()?;
            let union: Vec<f64> = pools.iter().flat_map(|(_, p)| range(p)).flat_map(|(a, b)| [a, b]).collect();
            let (lo, hi) = range(&union).expect("non-empty pools");
            let edges = histogram_edges(lo, hi, hist_bins);
            for (k, pool) in pools {
                let summary = summarize_on(&pool, &edges)?;
                let kde = opts.kde.then(|| kde(&pool, &summary.histogram.centers()));
                summaries.push(SummaryEntry {
                    metric,
                    layer,
                    accuracy_bin: k,
                    summary,
                    kde,
                });
            }
        }
    }

    let trends = trends_for(&occupied, topology.len())?;
    let mut bootstrap = Vec::with_capacity(opts.bootstrap_rounds);
    for round in 0..opts.bootstrap_rounds {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(round as u64));
        let resampled: Vec<(usize, Vec<&MetricRecord>)> = occupied
            .iter()
            .map(|(k, recs)| (*k, (0..recs.len()).map(|_| recs[rng.random_range(0..recs.len())]).collect()))
            .collect();
        bootstrap.push(BootstrapRound {
            round,
            trends: trends_for(&resampled, topology.len())?,
        });
    }

    Ok(EnsembleReport {
        schema: ENSEMBLE_REPORT_SCHEMA.into(),
        accuracy_edges: bins.edges.to_vec(),
        bin_counts: bins.counts(),
        min_population: bins.min_population,
        underpopulated: bins.underpopulated(),
        topology,
        histogram_bins: hist_bins,
        summaries,
        trends,
        bootstrap,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl EnsembleReport {
    pub fn to_json(&self) -> Vec<u8> {
        serde_json::to_vec_pretty(self).expect("report serialization is infallible")
    }

    pub fn summaries_for(&self, metric: Metric) -> impl Iterator<Item = &SummaryEntry> {
        self.summaries.iter().filter(move |s| s.metric == metric)
    }

    pub fn trend(&self, layer: usize, accuracy_bin: usize) -> Option<&TrendEntry> {
        self.trends.iter().find(|t| t.layer == layer && t.accuracy_bin == accuracy_bin)
    }

    /// Long format: `metric,layer,accuracy_bin,stat_name,value`.
    pub fn tidy_csv(&self) -> String {
        let mut out = String::from("metric,layer,accuracy_bin,stat_name,value\n");
        for e in &self.summaries {
            let s = &e.summary;
            let stats = [
                ("n", s.n.to_string()),
                ("mean", s.mean.to_string()),
                ("variance", s.variance.to_string()),
                ("skewness", opt(s.skewness)),
                ("kurtosis", opt(s.kurtosis)),
            ];
            for (name, value) in stats {
                let _ = writeln!(out, "{},{},{},{},{}", e.metric.name(), e.layer, e.accuracy_bin, name, value);
            }
        }
        out
    }

    /// One row per distribution of `metric`.
    pub fn summary_csv(&self, metric: Metric) -> String {
        let mut out = String::from("metric,layer,accuracy_bin,n,mean,variance,skewness,kurtosis\n");
        for e in self.summaries_for(metric) {
            let s = &e.summary;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                metric.name(),
                e.layer,
                e.accuracy_bin,
                s.n,
                s.mean,
                s.variance,
                opt(s.skewness),
                opt(s.kurtosis)
            );
        }
        out
    }

    /// Histogram bins of every distribution of `metric`, ready to plot.
    pub fn pdf_csv(&self, metric: Metric) -> String {
        let mut out = String::from("metric,layer,accuracy_bin,bin_lo,bin_hi,density,kde\n");
        for e in self.summaries_for(metric) {
            let h = &e.summary.histogram;
            for (i, d) in h.densities.iter().enumerate() {
                let k = e.kde.as_ref().map(|k| k[i].to_string()).unwrap_or_default();
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    metric.name(),
                    e.layer,
                    e.accuracy_bin,
                    h.edges[i],
                    h.edges[i + 1],
                    d,
                    k
                );
            }
        }
        out
    }

    /// `round,layer,accuracy_bin,stat_name,value` for the point estimate
    /// (round `base`) and every resampling round.
    pub fn trends_csv(&self) -> String {
        let mut out = String::from("round,layer,accuracy_bin,stat_name,value\n");
        let rounds = std::iter::once(("base".to_string(), &self.trends))
            .chain(self.bootstrap.iter().map(|b| (b.round.to_string(), &b.trends)));
        for (round, trends) in rounds {
            for t in trends {
                let stats = [
                    ("networks", t.networks.to_string()),
                    ("strength_variance", t.strength_variance.to_string()),
                    ("strength_kurtosis", opt(t.strength_kurtosis)),
                    ("mean_fluctuation", t.mean_fluctuation.to_string()),
                ];
                for (name, value) in stats {
                    let _ = writeln!(out, "{round},{},{},{name},{value}", t.layer, t.accuracy_bin);
                }
            }
        }
        out
    }
}
