//! The `cnt` command line.
//!
//! Exit codes: 0 success, 1 validation or internal failure, 2 usage or
//! path error. `CNT_THREADS` caps the worker pool used for training
//! populations and analyzing many snapshots; outputs do not depend on it.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::{self, Metric, ReportOptions, DEFAULT_MIN_POPULATION};
use crate::error::Error;
use crate::metrics::{analyze_snapshot, AnalyzeOptions, LinkStatsMode, MetricRecord};
use crate::oracle::{self, ExportFormat, DEFAULT_EDGE_CAP};
use crate::snapshot::{read_snapshot, write_snapshot, write_snapshot_json, NetworkSnapshot};
use crate::trainer::{self, Dataset, TrainConfig};

pub const RUN_MANIFEST_SCHEMA: &str = "cnt.run_manifest/1";
pub const POPULATION_INDEX_SCHEMA: &str = "cnt.population_index/1";
pub const THREADS_ENV: &str = "CNT_THREADS";

#[derive(Debug, Parser)]
#[command(name = "cnt", version, about = "Complex-network metrics for trained neural networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a population of classifiers and write their snapshots.
    Train(TrainArgs),
    /// Compute metric records for snapshots.
    Analyze(AnalyzeArgs),
    /// Build an ensemble or trajectory report from metric records.
    Report(ReportArgs),
    /// Cross-check the fast metrics against an explicit edge list.
    Oracle(OracleArgs),
    /// Convert a snapshot between the binary and JSON encodings.
    Convert(ConvertArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// TrainConfig JSON.
    #[arg(long)]
    pub config: PathBuf,
    /// CSV (features then label) or IDX image file; the bundled digits when absent.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// IDX label file, required with an IDX image file.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Number of networks.
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    /// Early-stop accuracy targets, assigned round-robin.
    #[arg(long, value_delimiter = ',')]
    pub targets: Vec<f64>,
    /// Added to the config seed.
    #[arg(long, default_value_t = 0)]
    pub seed_offset: u64,
    /// Output directory for snapshots, population.json and the manifest.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Snapshot files or directories of snapshots.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Output directory for records, metrics.csv and the manifest.
    #[arg(long)]
    pub out: PathBuf,
    /// Also compute per-neuron disparity.
    #[arg(long)]
    pub disparity: bool,
    /// Leave raw link weights out of the records.
    #[arg(long)]
    pub no_link_weights: bool,
    #[arg(long, value_enum, default_value_t = LinkModeArg::Realized)]
    pub link_mode: LinkModeArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkModeArg {
    Realized,
    Unique,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportKind {
    Ensemble,
    Trajectory,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(value_enum)]
    pub kind: ReportKind,
    /// Metric record JSON files, snapshots, or directories of either.
    /// Trajectory inputs are taken in the given order.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Output directory for the report and its CSV tables.
    #[arg(long)]
    pub out: PathBuf,
    /// Histogram bins per distribution.
    #[arg(long, default_value_t = ensemble::DEFAULT_HISTOGRAM_BINS)]
    pub bins: usize,
    /// Resampling rounds over records (ensemble only).
    #[arg(long, default_value_t = 10)]
    pub bootstrap: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_MIN_POPULATION)]
    pub min_population: usize,
    /// Add kernel density estimates to the histogram CSVs.
    #[arg(long)]
    pub kde: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EdgeFormatArg {
    Csv,
    Graphml,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    /// CNTS or JSON snapshot.
    pub snapshot: PathBuf,
    /// Maximum number of edges to unroll.
    #[arg(long, default_value_t = DEFAULT_EDGE_CAP)]
    pub oracle_cap: u64,
    /// Directory to write one edge list per block into.
    #[arg(long)]
    pub export: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = EdgeFormatArg::Csv)]
    pub format: EdgeFormatArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SnapshotEncoding {
    Cnts,
    Json,
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    /// Source snapshot (CNTS or JSON).
    pub input: PathBuf,
    /// Destination path.
    pub output: PathBuf,
    /// Output encoding; inferred from the output extension when absent.
    #[arg(long, value_enum)]
    pub to: Option<SnapshotEncoding>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandKind {
    Train,
    Analyze,
    Report,
    Oracle,
    Convert,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ManifestFlags {
    pub disparity: bool,
    pub histogram_bins: Option<usize>,
    pub bootstrap_rounds: Option<usize>,
    pub oracle_cap: Option<u64>,
    pub seed_offset: Option<u64>,
}

/// What one invocation reads and writes. Written next to the outputs so a
/// run can be repeated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema: String,
    pub command: CommandKind,
    pub config_path: Option<PathBuf>,
    pub inputs: Vec<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub flags: ManifestFlags,
}

impl RunManifest {
    pub fn from_command(cmd: &Command) -> Self {
        let mut m = RunManifest {
            schema: RUN_MANIFEST_SCHEMA.into(),
            command: CommandKind::Convert,
            config_path: None,
            inputs: Vec::new(),
            output_dir: None,
            flags: ManifestFlags::default(),
        };
        match cmd {
            Command::Train(a) => {
                m.command = CommandKind::Train;
                m.config_path = Some(a.config.clone());
                m.inputs = a.dataset.iter().chain(&a.labels).cloned().collect();
                m.output_dir = Some(a.out.clone());
                m.flags.seed_offset = Some(a.seed_offset);
            }
            Command::Analyze(a) => {
                m.command = CommandKind::Analyze;
                m.inputs = a.inputs.clone();
                m.output_dir = Some(a.out.clone());
                m.flags.disparity = a.disparity;
            }
            Command::Report(a) => {
                m.command = CommandKind::Report;
                m.inputs = a.inputs.clone();
                m.output_dir = Some(a.out.clone());
                m.flags.histogram_bins = Some(a.bins);
                m.flags.bootstrap_rounds = Some(a.bootstrap);
            }
            Command::Oracle(a) => {
                m.command = CommandKind::Oracle;
                m.inputs = vec![a.snapshot.clone()];
                m.output_dir = a.export.clone();
                m.flags.oracle_cap = Some(a.oracle_cap);
            }
            Command::Convert(a) => {
                m.inputs = vec![a.input.clone()];
            }
        }
        m
    }

    /// Checks that every referenced path exists and creates the output
    /// directory.
    pub fn prepare(&self) -> Result<(), CliError> {
        for p in self.config_path.iter().chain(&self.inputs) {
            if !p.exists() {
                return Err(CliError::Usage(format!("{}: no such file or directory", p.display())));
            }
        }
        if let Some(dir) = &self.output_dir {
            fs::create_dir_all(dir).map_err(|e| CliError::Usage(format!("{}: {e}", dir.display())))?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> Vec<u8> {
        serde_json::to_vec_pretty(self).expect("manifest serialization is infallible")
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Failed(_) => 1,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Failed(e.to_string())
    }
}

fn at(path: &Path) -> impl Fn(Error) -> CliError + '_ {
    move |e| CliError::Failed(format!("{}: {e}", path.display()))
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::Failed(format!("{}: {e}", path.display())))
}

/// Files named directly, plus files with one of `exts` inside named
/// directories (sorted by name).
fn expand_inputs(paths: &[PathBuf], exts: &[&str]) -> Result<Vec<PathBuf>, CliError> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(p)
                .map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.is_file() && f.extension().and_then(|x| x.to_str()).is_some_and(|x| exts.contains(&x)))
                .collect();
            found.sort();
            out.extend(found);
        } else {
            out.push(p.clone());
        }
    }
    if out.is_empty() {
        return Err(CliError::Usage("no input files".into()));
    }
    Ok(out)
}

fn load_snapshot(path: &Path) -> Result<NetworkSnapshot, CliError> {
    read_snapshot(&read(path)?).map_err(at(path))
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn thread_pool() -> Result<rayon::ThreadPool, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| CliError::Usage(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?;
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| CliError::Failed(e.to_string()))
}

/// Parses `args` (program name first) and runs the command.
pub fn run_from<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code().clamp(0, 255) as u8);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("cnt: error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

pub fn main() -> ExitCode {
    run_from(std::env::args_os())
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let manifest = RunManifest::from_command(&cli.command);
    manifest.prepare()?;
    let pool = thread_pool()?;
    pool.install(|| match &cli.command {
        Command::Train(a) => cmd_train(a, &manifest),
        Command::Analyze(a) => cmd_analyze(a, &manifest),
        Command::Report(a) => cmd_report(a, &manifest),
        Command::Oracle(a) => cmd_oracle(a),
        Command::Convert(a) => cmd_convert(a),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotEntry {
    pub file: String,
    pub epoch: u64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberEntry {
    pub index: usize,
    pub seed: u64,
    pub target: Option<f64>,
    pub reached_target: bool,
    pub snapshots: Vec<SnapshotEntry>,
    /// File of the stopping state (or best state when the target was missed).
    pub representative: String,
}

/// Lists every file a `train` run wrote.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationIndex {
    pub schema: String,
    pub config: TrainConfig,
    pub count: usize,
    pub targets: Vec<f64>,
    pub members: Vec<MemberEntry>,
}

/// `<tag>_seed<seed>_acc<4 decimals>.cnts`.
pub fn snapshot_file_name(s: &NetworkSnapshot) -> String {
    let m = s.meta();
    format!("{}_seed{}_acc{:.4}.cnts", m.task_tag, m.seed, m.accuracy)
}

fn unique_name(s: &NetworkSnapshot, taken: &mut BTreeSet<String>) -> String {
    let base = snapshot_file_name(s);
    let stem = base.trim_end_matches(".cnts");
    let mut name = base.clone();
    let mut k = 1;
    while taken.contains(&name) {
        name = if k == 1 {
            format!("{stem}_epoch{}.cnts", s.meta().epoch)
        } else {
            format!("{stem}_epoch{}_{k}.cnts", s.meta().epoch)
        };
        k += 1;
    }
    taken.insert(name.clone());
    name
}

fn load_dataset(a: &TrainArgs) -> Result<(Dataset, Dataset), CliError> {
    let Some(path) = &a.dataset else {
        return Ok(trainer::bundled_digits_split());
    };
    let bytes = read(path)?;
    let full = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        let text = String::from_utf8(bytes).map_err(|_| CliError::Failed(format!("{}: not UTF-8", path.display())))?;
        trainer::dataset_from_csv(&text).map_err(at(path))?
    } else {
        let labels = a
            .labels
            .as_ref()
            .ok_or_else(|| CliError::Usage("an IDX image file needs --labels".into()))?;
        trainer::dataset_from_idx(&bytes, &read(labels)?).map_err(at(path))?
    };
    Ok(full.split(0.8, 0)?)
}

fn cmd_train(a: &TrainArgs, manifest: &RunManifest) -> Result<(), CliError> {
    let mut cfg = TrainConfig::from_json(&read(&a.config)?).map_err(at(&a.config))?;
    cfg.seed = cfg.seed.wrapping_add(a.seed_offset);
    if let Some(t) = a.targets.iter().find(|t| !(0.0..=1.0).contains(*t)) {
        return Err(CliError::Usage(format!("target {t} outside [0, 1]")));
    }
    if a.count == 0 {
        return Err(CliError::Usage("--count must be positive".into()));
    }
    let (data, eval) = load_dataset(a)?;
    let members = trainer::generate_population(&cfg, a.count, &a.targets, &data, &eval)?;

    let mut taken = BTreeSet::new();
    let mut entries = Vec::new();
    for m in &members {
        let mut snapshots = Vec::new();
        let mut representative = None;
        for s in &m.snapshots {
            let file = unique_name(s, &mut taken);
            write(&a.out.join(&file), write_snapshot(s))?;
            if s == &m.representative {
                representative = Some(file.clone());
            }
            snapshots.push(SnapshotEntry {
                file,
                epoch: s.meta().epoch,
                accuracy: s.meta().accuracy,
            });
        }
        let representative = match representative {
            Some(f) => f,
            None => {
                let file = unique_name(&m.representative, &mut taken);
                write(&a.out.join(&file), write_snapshot(&m.representative))?;
                file
            }
        };
        if !m.reached_target {
            eprintln!(
                "cnt: warning: network {} (seed {}) missed target {:?}; kept its best state",
                m.index, m.seed, m.target
            );
        }
        entries.push(MemberEntry {
            index: m.index,
            seed: m.seed,
            target: m.target,
            reached_target: m.reached_target,
            snapshots,
            representative,
        });
    }
    let index = PopulationIndex {
        schema: POPULATION_INDEX_SCHEMA.into(),
        config: cfg,
        count: a.count,
        targets: a.targets.clone(),
        members: entries,
    };
    write(&a.out.join("population.json"), serde_json::to_vec_pretty(&index).expect("infallible"))?;
    write(&a.out.join("run_manifest.json"), manifest.to_json())?;
    println!("wrote {} snapshots for {} networks to {}", taken.len(), a.count, a.out.display());
    Ok(())
}

/// Long-format rows `snapshot,metric,layer,index,value`; `index` is empty
/// for per-layer metrics.
pub fn metrics_csv_rows(name: &str, r: &MetricRecord, out: &mut String) {
    for l in &r.link_stats {
        let _ = writeln!(out, "{name},mu,{},,{}", l.layer_index, l.mu);
        let _ = writeln!(out, "{name},delta,{},,{}", l.layer_index, l.delta);
        let _ = writeln!(out, "{name},links,{},,{}", l.layer_index, l.links);
    }
    for sv in &r.strengths {
        for k in 0..sv.len() {
            let _ = writeln!(out, "{name},s_in,{},{k},{}", sv.layer_index, sv.s_in[k]);
            let _ = writeln!(out, "{name},s_out,{},{k},{}", sv.layer_index, sv.s_out[k]);
            let _ = writeln!(out, "{name},s,{},{k},{}", sv.layer_index, sv.s[k]);
        }
    }
    for f in &r.fluctuations {
        let _ = writeln!(out, "{name},fluctuation,{},,{}", f.layer_index, f.value);
    }
    for d in r.disparities.iter().flatten() {
        for (k, v) in d.values.iter().enumerate() {
            let value = v.value.map(|x| x.to_string()).unwrap_or_default();
            let _ = writeln!(out, "{name},disparity,{},{k},{value}", d.layer_index);
        }
    }
}

fn analyze_options(a: &AnalyzeArgs) -> AnalyzeOptions {
    AnalyzeOptions {
        disparity: a.disparity,
        keep_link_weights: !a.no_link_weights,
        link_mode: match a.link_mode {
            LinkModeArg::Realized => LinkStatsMode::Realized,
            LinkModeArg::Unique => LinkStatsMode::UniqueWeights,
        },
        ..AnalyzeOptions::default()
    }
}

fn cmd_analyze(a: &AnalyzeArgs, manifest: &RunManifest) -> Result<(), CliError> {
    let files = expand_inputs(&a.inputs, &["cnts"])?;
    let mut stems = BTreeSet::new();
    for f in &files {
        if !stems.insert(stem(f)) {
            return Err(CliError::Usage(format!("two inputs share the name {:?}", stem(f))));
        }
    }
    let opts = analyze_options(a);
    let records = files
        .par_iter()
        .map(|f| analyze_snapshot(&load_snapshot(f)?, &opts).map_err(at(f)))
        .collect::<Result<Vec<_>, _>>()?;
    let mut csv = String::from("snapshot,metric,layer,index,value\n");
    for (f, r) in files.iter().zip(&records) {
        let name = stem(f);
        write(&a.out.join(format!("{name}.json")), r.to_json())?;
        metrics_csv_rows(&name, r, &mut csv);
    }
    write(&a.out.join("metrics.csv"), csv)?;
    write(&a.out.join("run_manifest.json"), manifest.to_json())?;
    println!("analyzed {} snapshots into {}", records.len(), a.out.display());
    Ok(())
}

fn load_records(inputs: &[PathBuf]) -> Result<Vec<MetricRecord>, CliError> {
    let files = expand_inputs(inputs, &["json", "cnts"])?;
    let files: Vec<PathBuf> = files
        .into_iter()
        .filter(|f| stem(f) != "run_manifest" && stem(f) != "population")
        .collect();
    let opts = AnalyzeOptions {
        keep_link_weights: true,
        ..AnalyzeOptions::default()
    };
    files
        .par_iter()
        .map(|f| {
            let bytes = read(f)?;
            if f.extension().is_some_and(|e| e == "cnts") {
                Ok(analyze_snapshot(&read_snapshot(&bytes).map_err(at(f))?, &opts).map_err(at(f))?)
            } else {
                MetricRecord::from_json(&bytes).map_err(at(f))
            }
        })
        .collect()
}

fn cmd_report(a: &ReportArgs, manifest: &RunManifest) -> Result<(), CliError> {
    let records = load_records(&a.inputs)?;
    if a.bins == 0 {
        return Err(CliError::Usage("--bins must be positive".into()));
    }
    match a.kind {
        ReportKind::Ensemble => {
            let bins = ensemble::bin_by_accuracy(records, a.min_population)?;
            for b in bins.underpopulated() {
                eprintln!(
                    "cnt: warning: accuracy bin {b} holds {} networks (< {})",
                    bins.bins[b].len(),
                    a.min_population
                );
            }
            let opts = ReportOptions {
                histogram_bins: a.bins,
                bootstrap_rounds: a.bootstrap,
                seed: a.seed,
                kde: a.kde,
            };
            let report = ensemble::ensemble_report(&bins, &opts)?;
            write(&a.out.join("ensemble_report.json"), report.to_json())?;
            for metric in Metric::ALL {
                if report.summaries_for(metric).next().is_none() {
                    continue;
                }
                write(&a.out.join(format!("{}_summary.csv", metric.name())), report.summary_csv(metric))?;
                write(&a.out.join(format!("{}_pdf.csv", metric.name())), report.pdf_csv(metric))?;
            }
            write(&a.out.join("tidy.csv"), report.tidy_csv())?;
            write(&a.out.join("trends.csv"), report.trends_csv())?;
            println!(
                "ensemble report over {} networks in bins {:?} written to {}",
                bins.total(),
                bins.occupied(),
                a.out.display()
            );
        }
        ReportKind::Trajectory => {
            let report = ensemble::trajectory_report(&records, a.bins)?;
            if !report.accuracy_monotone {
                eprintln!("cnt: warning: accuracy decreases along the given snapshot order");
            }
            write(&a.out.join("trajectory_report.json"), report.to_json())?;
            write(&a.out.join("error_bars.csv"), report.error_bar_csv())?;
            write(&a.out.join("strength_pdf.csv"), report.strength_pdf_csv())?;
            println!("trajectory report over {} snapshots written to {}", records.len(), a.out.display());
        }
    }
    write(&a.out.join("run_manifest.json"), manifest.to_json())?;
    Ok(())
}

fn cmd_oracle(a: &OracleArgs) -> Result<(), CliError> {
    let s = load_snapshot(&a.snapshot)?;
    let report = match oracle::verify_snapshot(&s, a.oracle_cap) {
        Err(e @ Error::SizeCap { .. }) => {
            return Err(CliError::Failed(format!("{e} (pass --oracle-cap)")));
        }
        r => r?,
    };
    for b in &report.blocks {
        println!(
            "block {} ({}, {} edges): mu {:.3e} delta {:.3e} s_out {:.3e} s_in {:.3e} [tol {:.0e}] {}",
            b.layer_index,
            b.kind,
            b.edges,
            b.mu,
            b.delta,
            b.s_out,
            b.s_in,
            b.tolerance,
            if b.passes() { "ok" } else { "FAIL" }
        );
    }
    println!("fluctuation deviation: {:.3e}", report.fluctuation);
    println!("max deviation: {:.3e}", report.max_deviation());
    if let Some(dir) = &a.export {
        let (format, ext) = match a.format {
            EdgeFormatArg::Csv => (ExportFormat::Csv, "csv"),
            EdgeFormatArg::Graphml => (ExportFormat::GraphExchange, "graphml"),
        };
        for (b, layer) in s.layers().iter().enumerate() {
            let list = oracle::unroll_layer(layer, b, a.oracle_cap)?;
            write(&dir.join(format!("block{b}.{ext}")), oracle::export_edge_list(&list, format))?;
        }
    }
    if report.passes() {
        println!("PASS");
        Ok(())
    } else {
        Err(CliError::Failed("fast path deviates from the oracle beyond tolerance".into()))
    }
}

fn cmd_convert(a: &ConvertArgs) -> Result<(), CliError> {
    let s = load_snapshot(&a.input)?;
    let to = a.to.unwrap_or_else(|| {
        if a.output.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            SnapshotEncoding::Json
        } else {
            SnapshotEncoding::Cnts
        }
    });
    let bytes = match to {
        SnapshotEncoding::Cnts => write_snapshot(&s),
        SnapshotEncoding::Json => write_snapshot_json(&s),
    };
    write(&a.output, bytes)
}
