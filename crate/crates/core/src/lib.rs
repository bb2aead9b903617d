//! Complex-network analysis of trained feed-forward neural networks.
//!
//! A network is read as a directed, weighted, layered bipartite graph:
//! neurons are nodes and every weight is a link. On top of that view the
//! crate computes link-weight moments, node strength, layer fluctuation and
//! node disparity for dense and 2-D convolutional blocks, aggregates them
//! over accuracy-binned populations of networks, and ships a small
//! from-scratch trainer to generate such populations.
//!
//! Module map:
//!
//! - [`snapshot`]: data model and the CNTS file format.
//! - [`metrics`]: the metric families, with a weight-sharing path for convolutions.
//! - [`oracle`]: explicit edge-list expansion used to cross-check `metrics`.
//! - [`ensemble`]: accuracy binning, pooled distributions, moments, trajectories.
//! - [`trainer`]: ReLU MLP trainer, datasets and population generation.
//! - [`cli`]: the `cnt` command-line front end.

pub mod cli;
pub mod ensemble;
pub mod error;
pub mod metrics;
pub mod numeric;
pub mod oracle;
pub mod snapshot;
pub mod trainer;

pub use error::{Error, Result};
pub use metrics::{analyze_snapshot, AnalyzeOptions, MetricRecord};
pub use snapshot::{read_snapshot, write_snapshot, NetworkSnapshot};
