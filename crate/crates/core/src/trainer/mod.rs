//! Minimal fully connected ReLU classifier trainer.
//!
//! Plain mini-batch SGD on softmax cross-entropy, biases initialized to
//! zero, weights drawn from a normal or uniform family. Everything random
//! comes from [`ChaCha8Rng`] seeded with the config seed: stream 0 draws
//! the initial weights, stream 1 the per-epoch shuffles. A run is therefore
//! bit-reproducible on any platform.
//!
//! Training is used to produce accuracy-tagged snapshot populations; early
//! stopping at a target accuracy is what spreads a population across the
//! accuracy range.

mod data;
mod net;

pub use data::{
    bundled_digits, bundled_digits_split, dataset_from_csv, dataset_from_idx, gaussian_blobs, min_max_normalize,
    read_idx_images, read_idx_labels, Dataset,
};
pub use net::{accuracy, argmax, cross_entropy, cross_entropy_gradients, forward, log_sum_exp, softmax, Forward, Gradients};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::snapshot::{Dense, InitFamily, LayerWeights, Matrix, NetworkSnapshot, OutputActivation, SnapshotMeta};

/// When [`train`] emits snapshots. The stopping state is always emitted last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SnapshotSchedule {
    /// After every completed epoch.
    #[default]
    EveryEpoch,
    /// The first time evaluation accuracy reaches each threshold.
    OnAccuracyCrossings { thresholds: Vec<f64> },
}

fn default_task_tag() -> String {
    "digits8x8".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    /// Neuron counts, input first.
    pub layer_sizes: Vec<usize>,
    pub init_family: InitFamily,
    /// Standard deviation (normal) or half-width of the support (uniform).
    pub init_scale: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    #[serde(default)]
    pub early_stop_at_accuracy: Option<f64>,
    pub seed: u64,
    #[serde(default)]
    pub snapshot_schedule: SnapshotSchedule,
    /// Also evaluate every this many mini-batches, so early stopping can
    /// land inside an epoch. Epoch ends are always evaluated.
    #[serde(default)]
    pub eval_every_batches: Option<usize>,
    #[serde(default = "default_task_tag")]
    pub task_tag: String,
}

impl TrainConfig {
    /// A small digits classifier with the given hidden widths.
    pub fn digits(hidden: &[usize], seed: u64) -> Self {
        let mut layer_sizes = vec![64];
        layer_sizes.extend_from_slice(hidden);
        layer_sizes.push(10);
        Self {
            layer_sizes,
            init_family: InitFamily::Normal,
            init_scale: 0.05,
            learning_rate: 0.1,
            batch_size: 32,
            max_epochs: 30,
            early_stop_at_accuracy: None,
            seed,
            snapshot_schedule: SnapshotSchedule::default(),
            eval_every_batches: None,
            task_tag: default_task_tag(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_sizes.len() < 2 {
            return Err(Error::Validation("layer_sizes needs at least an input and an output".into()));
        }
        if self.layer_sizes.contains(&0) {
            return Err(Error::Validation("layer sizes must be positive".into()));
        }
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.init_scale) {
            return Err(Error::Validation(format!("init_scale must be positive, got {}", self.init_scale)));
        }
        if !positive(self.learning_rate) {
            return Err(Error::Validation(format!("learning_rate must be positive, got {}", self.learning_rate)));
        }
        if self.batch_size == 0 || self.max_epochs == 0 || self.eval_every_batches == Some(0) {
            return Err(Error::Validation("batch_size, max_epochs and eval_every_batches must be positive".into()));
        }
        let in_unit = |v: f64| (0.0..=1.0).contains(&v);
        if let Some(t) = self.early_stop_at_accuracy {
            if !in_unit(t) {
                return Err(Error::Validation(format!("early_stop_at_accuracy {t} outside [0, 1]")));
            }
        }
        if let SnapshotSchedule::OnAccuracyCrossings { thresholds } = &self.snapshot_schedule {
            if let Some(t) = thresholds.iter().find(|t| !in_unit(**t)) {
                return Err(Error::Validation(format!("threshold {t} outside [0, 1]")));
            }
        }
        Ok(())
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let cfg: Self = serde_json::from_slice(bytes)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Vec<u8> {
        serde_json::to_vec_pretty(self).expect("config serialization is infallible")
    }

    fn meta(&self, accuracy: f64, epoch: u64) -> SnapshotMeta {
        SnapshotMeta {
            accuracy,
            epoch,
            init_family: self.init_family,
            init_scale: self.init_scale,
            seed: self.seed,
            task_tag: self.task_tag.clone(),
            output_activation: OutputActivation::Softmax,
        }
    }
}

fn init_layers(cfg: &TrainConfig) -> Result<Vec<Dense>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut draw: Box<dyn FnMut(&mut ChaCha8Rng) -> f64> = match cfg.init_family {
        InitFamily::Normal => {
            let d = Normal::new(0.0, cfg.init_scale).map_err(|e| Error::Validation(e.to_string()))?;
            Box::new(move |r| d.sample(r))
        }
        InitFamily::Uniform => {
            let d = Uniform::new(-cfg.init_scale, cfg.init_scale).map_err(|e| Error::Validation(e.to_string()))?;
            Box::new(move |r| d.sample(r))
        }
    };
    cfg.layer_sizes
        .windows(2)
        .map(|w| {
            let data = (0..w[0] * w[1]).map(|_| draw(&mut rng)).collect();
            Dense::new(Matrix::new(w[0], w[1], data)?, vec![0.0; w[1]])
        })
        .collect()
}

fn snapshot_of(layers: &[Dense], meta: SnapshotMeta) -> Result<NetworkSnapshot> {
    NetworkSnapshot::new(layers.iter().cloned().map(LayerWeights::Dense).collect(), meta)
}

/// Freshly initialized network. Its accuracy is measured on `eval` when
/// given and left at 0 otherwise.
pub fn init_network(cfg: &TrainConfig, eval: Option<&Dataset>) -> Result<NetworkSnapshot> {
    let layers = init_layers(cfg)?;
    let s = snapshot_of(&layers, cfg.meta(0.0, 0))?;
    match eval {
        Some(d) => {
            let acc = accuracy(&s, d)?;
            s.with_meta(cfg.meta(acc, 0))
        }
        None => Ok(s),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: u64,
    /// Mean mini-batch loss over the epoch (or the part of it that ran).
    pub train_loss: f64,
    pub eval_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainRun {
    /// Snapshots in emission order; the last one is the stopping state.
    pub snapshots: Vec<NetworkSnapshot>,
    pub history: Vec<EpochStats>,
    /// Whether `early_stop_at_accuracy` was reached; `None` without a target.
    pub reached_target: Option<bool>,
    /// State with the highest evaluation accuracy seen, earliest on ties.
    pub best: NetworkSnapshot,
}

impl TrainRun {
    pub fn last(&self) -> &NetworkSnapshot {
        self.snapshots.last().expect("a run emits at least one snapshot")
    }
}

/// Mini-batch SGD with per-epoch shuffling, early stopping and scheduled
/// snapshots.
pub fn train(cfg: &TrainConfig, data: &Dataset, eval: &Dataset) -> Result<TrainRun> {
    let mut layers = init_layers(cfg)?;
    for (name, d) in [("training", data), ("evaluation", eval)] {
        if d.dim() != cfg.layer_sizes[0] {
            return Err(Error::Argument(format!(
                "{name} data has {} features, network takes {}",
                d.dim(),
                cfg.layer_sizes[0]
            )));
        }
        if d.classes() > *cfg.layer_sizes.last().unwrap() {
            return Err(Error::Argument(format!(
                "{name} data has {} classes, network emits {}",
                d.classes(),
                cfg.layer_sizes.last().unwrap()
            )));
        }
    }
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    shuffle_rng.set_stream(1);

    let target = cfg.early_stop_at_accuracy;
    let mut pending: Vec<f64> = match &cfg.snapshot_schedule {
        SnapshotSchedule::EveryEpoch => Vec::new(),
        SnapshotSchedule::OnAccuracyCrossings { thresholds } => thresholds.clone(),
    };
    let mut snapshots = Vec::new();
    let mut history = Vec::new();

    let current = snapshot_of(&layers, cfg.meta(0.0, 0))?;
    let acc0 = accuracy(&current, eval)?;
    let mut best = current.with_meta(cfg.meta(acc0, 0))?;
    let mut last = best.clone();
    let mut stopped = target.is_some_and(|t| acc0 >= t);

    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut epoch = 0u64;
    while !stopped && (epoch as usize) < cfg.max_epochs {
        epoch += 1;
        order.shuffle(&mut shuffle_rng);
        let batches: Vec<&[usize]> = order.chunks(cfg.batch_size).collect();
        let mut loss_sum = 0.0;
        let mut ran = 0;
        for (k, batch) in batches.iter().enumerate() {
            let loss = net::sgd_step(&mut layers, data, batch, cfg.learning_rate);
            if !loss.is_finite() || layers.iter().any(|l| l.weights().as_slice().iter().any(|v| !v.is_finite())) {
                return Err(Error::Diverged { epoch: epoch as usize });
            }
            loss_sum += loss;
            ran += 1;
            let epoch_end = k + 1 == batches.len();
            let scheduled = cfg.eval_every_batches.is_some_and(|n| (k + 1) % n == 0);
            if !(epoch_end || scheduled) {
                continue;
            }
            let s = snapshot_of(&layers, cfg.meta(0.0, epoch))?;
            let acc = accuracy(&s, eval)?;
            let s = s.with_meta(cfg.meta(acc, epoch))?;
            if acc > best.meta().accuracy {
                best = s.clone();
            }
            let crossed = pending.iter().any(|&t| acc >= t);
            pending.retain(|&t| acc < t);
            stopped = target.is_some_and(|t| acc >= t);
            let every_epoch = epoch_end && cfg.snapshot_schedule == SnapshotSchedule::EveryEpoch;
            if crossed || every_epoch {
                snapshots.push(s.clone());
            }
            last = s;
            if stopped {
                break;
            }
        }
        history.push(EpochStats {
            epoch,
            train_loss: loss_sum / ran as f64,
            eval_accuracy: last.meta().accuracy,
        });
    }
    if snapshots.last() != Some(&last) {
        snapshots.push(last);
    }
    Ok(TrainRun {
        snapshots,
        history,
        reached_target: target.map(|_| stopped),
        best,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PopulationMember {
    pub index: usize,
    pub seed: u64,
    pub target: Option<f64>,
    /// `false` when the target was missed within `max_epochs`.
    pub reached_target: bool,
    /// Scheduled snapshots of the run.
    pub snapshots: Vec<NetworkSnapshot>,
    /// The stopping state, or the best state seen when the target was missed.
    pub representative: NetworkSnapshot,
}

/// Trains `count` networks with seeds `base.seed + i`, early-stopping
/// network `i` at `targets[i % targets.len()]` (no early stop when
/// `targets` is empty). Networks train in parallel on the current rayon
/// pool; results do not depend on the thread count.
pub fn generate_population(
    base: &TrainConfig,
    count: usize,
    targets: &[f64],
    data: &Dataset,
    eval: &Dataset,
) -> Result<Vec<PopulationMember>> {
    if count == 0 {
        return Err(Error::Argument("population count must be positive".into()));
    }
    base.validate()?;
    (0..count)
        .into_par_iter()
        .map(|i| {
            let target = (!targets.is_empty()).then(|| targets[i % targets.len()]);
            let cfg = TrainConfig {
                seed: base.seed.wrapping_add(i as u64),
                early_stop_at_accuracy: target.or(base.early_stop_at_accuracy),
                ..base.clone()
            };
            let run = train(&cfg, data, eval)?;
            let reached = run.reached_target.unwrap_or(true);
            let representative = if reached { run.last().clone() } else { run.best.clone() };
            Ok(PopulationMember {
                index: i,
                seed: cfg.seed,
                target: cfg.early_stop_at_accuracy,
                reached_target: reached,
                snapshots: run.snapshots,
                representative,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blobs() -> (Dataset, Dataset) {
        gaussian_blobs(40, 3, 4, 0.15, 1).unwrap().split(0.75, 0).unwrap()
    }

    fn cfg(seed: u64) -> TrainConfig {
        TrainConfig {
            layer_sizes: vec![4, 8, 3],
            max_epochs: 5,
            learning_rate: 0.5,
            batch_size: 8,
            ..TrainConfig::digits(&[], seed)
        }
    }

    #[test]
    fn init_is_deterministic_and_bounded() {
        let mut c = TrainConfig::digits(&[32, 32], 3);
        c.init_family = InitFamily::Uniform;
        let a = init_network(&c, None).unwrap();
        assert_eq!(a, init_network(&c, None).unwrap());
        assert!(a.layers().iter().all(|l| l.weight_values().iter().all(|w| w.abs() < 0.05)));
        assert!(a.layers().iter().all(|l| l.bias().iter().all(|&b| b == 0.0)));
    }

    #[test]
    fn normal_init_has_requested_spread() {
        let c = TrainConfig {
            layer_sizes: vec![100, 100],
            init_scale: 0.5,
            ..TrainConfig::digits(&[], 11)
        };
        let s = init_network(&c, None).unwrap();
        let w = s.layers()[0].weight_values();
        let (_, var) = crate::numeric::mean_and_population_variance(w).unwrap();
        assert!((var.sqrt() - 0.5).abs() < 0.02, "{}", var.sqrt());
    }

    #[test]
    fn config_rejects_bad_values() {
        let mut c = cfg(0);
        c.layer_sizes = vec![4];
        assert!(c.validate().is_err());
        let mut c = cfg(0);
        c.learning_rate = 0.0;
        assert!(c.validate().is_err());
        let mut c = cfg(0);
        c.early_stop_at_accuracy = Some(1.5);
        assert!(c.validate().is_err());
        assert!(TrainConfig::from_json(br#"{"layer_sizes":[2,2]}"#).is_err());
    }

    #[test]
    fn config_json_round_trip() {
        let mut c = cfg(7);
        c.snapshot_schedule = SnapshotSchedule::OnAccuracyCrossings { thresholds: vec![0.5] };
        assert_eq!(TrainConfig::from_json(&c.to_json()).unwrap(), c);
    }

    #[test]
    fn every_epoch_schedule() {
        let (tr, ev) = blobs();
        let run = train(&cfg(1), &tr, &ev).unwrap();
        assert_eq!(run.snapshots.len(), 5);
        assert_eq!(run.history.len(), 5);
        let epochs: Vec<u64> = run.snapshots.iter().map(|s| s.meta().epoch).collect();
        assert_eq!(epochs, vec![1, 2, 3, 4, 5]);
        assert_eq!(run, train(&cfg(1), &tr, &ev).unwrap());
    }

    #[test]
    fn early_stop_respects_target() {
        let (tr, ev) = blobs();
        let mut c = cfg(2);
        c.early_stop_at_accuracy = Some(0.6);
        c.eval_every_batches = Some(1);
        c.max_epochs = 50;
        let run = train(&c, &tr, &ev).unwrap();
        let last = run.last().meta();
        assert!(last.accuracy >= 0.6 || last.epoch == 50);
        assert_eq!(run.reached_target, Some(last.accuracy >= 0.6));
    }

    #[test]
    fn divergence_reports_epoch() {
        let (tr, ev) = blobs();
        let mut c = cfg(3);
        c.learning_rate = 1e300;
        c.init_scale = 10.0;
        assert!(matches!(train(&c, &tr, &ev), Err(Error::Diverged { epoch: 1 })));
    }

    #[test]
    fn population_assignment_and_seeds() {
        let (tr, ev) = blobs();
        let mut c = cfg(10);
        c.eval_every_batches = Some(1);
        c.snapshot_schedule = SnapshotSchedule::OnAccuracyCrossings { thresholds: vec![] };
        let pop = generate_population(&c, 4, &[0.3, 0.9], &tr, &ev).unwrap();
        let targets: Vec<_> = pop.iter().map(|m| m.target).collect();
        assert_eq!(targets, vec![Some(0.3), Some(0.9), Some(0.3), Some(0.9)]);
        let seeds: Vec<_> = pop.iter().map(|m| m.seed).collect();
        assert_eq!(seeds, vec![10, 11, 12, 13]);
        for m in &pop {
            assert!(m.reached_target == (m.representative.meta().accuracy >= m.target.unwrap()));
        }
        let inits: Vec<_> = (0..4)
            .map(|i| init_network(&TrainConfig { seed: 10 + i, ..c.clone() }, None).unwrap())
            .collect();
        for i in 0..4 {
            for j in i + 1..4 {
                assert_ne!(inits[i].layers(), inits[j].layers());
            }
        }
    }
}
